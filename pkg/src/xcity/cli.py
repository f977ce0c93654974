"""Command-line pipeline: ingest, phase1, phase2, validate, render.

Exit codes: 0 success or feasible, 1 usage/IO/schema errors, 2 solver found
no feasible answer, 3 validation failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .assets import AssetError, Placement, RoadAsset, load_asset, save_asset
from .constraints import DEFAULT_DELTA_TOL, feasibility_report
from .geometry import DEFAULT_EPS, GeometryError, Space
from .osm import OsmError, extract_asset, load_osm
from .phase1 import NoFeasibleSubset, SearchConfig, select_subset
from .phase2 import InfeasiblePlacement, optimize_connectivity
from .render import render_result

log = logging.getLogger("xcity")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ProjectConfig:
    space: Space
    assets: list[RoadAsset]
    solver: SearchConfig = field(default_factory=SearchConfig)
    phase2_solver: SearchConfig | None = None
    eps: float = DEFAULT_EPS
    delta_tol: float = DEFAULT_DELTA_TOL
    subset_cap: int = 12
    per_subset_budget: float | None = None

    @classmethod
    def load(cls, path: str | Path) -> "ProjectConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_json(data, base=path.parent)

    @classmethod
    def from_json(cls, data: Mapping, base: Path = Path(".")) -> "ProjectConfig":
        if not isinstance(data, Mapping) or "space" not in data:
            raise ConfigError("config must be an object with a 'space' polygon")
        try:
            space = Space(data["space"])
            assets = []
            for entry in data.get("assets", []):
                if isinstance(entry, Mapping):
                    assets.append(RoadAsset.from_json(entry))
                else:
                    assets.append(load_asset(base / entry))
            ids = [a.id for a in assets]
            if len(set(ids)) != len(ids):
                raise ConfigError(f"duplicate asset ids in {ids}")
            eps = float(data.get("eps", DEFAULT_EPS))
            delta_tol = float(data.get("delta_tol", DEFAULT_DELTA_TOL))
            if eps <= 0 or delta_tol <= 0:
                raise ConfigError("eps and delta_tol must be positive")
            p2 = data.get("phase2_solver")
            budget = data.get("per_subset_budget")
            return cls(
                space=space,
                assets=assets,
                solver=SearchConfig.from_json(data.get("solver")),
                phase2_solver=SearchConfig.from_json(p2) if p2 is not None else None,
                eps=eps,
                delta_tol=delta_tol,
                subset_cap=int(data.get("subset_cap", 12)),
                per_subset_budget=float(budget) if budget is not None else None,
            )
        except (GeometryError, AssetError, OSError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, seed: int | None, time_budget: float | None) -> "ProjectConfig":
        def patch(cfg: SearchConfig) -> SearchConfig:
            d = cfg.to_json()
            if seed is not None:
                d["seed"] = seed
            if time_budget is not None:
                d["time_budget"] = time_budget
            return SearchConfig(**d)

        self.solver = patch(self.solver)
        if self.phase2_solver is not None:
            self.phase2_solver = patch(self.phase2_solver)
        return self


def _coordinates(placement: Placement) -> dict[str, list[list[float]]]:
    return {aid: [[float(x), float(y)] for x, y in xy] for aid, xy in placement.coords.items()}


def run_phase1(cfg: ProjectConfig) -> tuple[dict, int]:
    try:
        sel = select_subset(
            cfg.assets, cfg.space, cfg.solver, cfg.per_subset_budget, cfg.subset_cap, cfg.eps, cfg.delta_tol
        )
    except NoFeasibleSubset as exc:
        doc = {
            "kind": "phase1",
            "status": "NoFeasibleSubset",
            "space": cfg.space.to_json(),
            "attempts": [[list(ids), status] for ids, status in exc.attempts],
            "diagnostics": [str(exc)] + exc.notes,
        }
        return doc, EXIT_INFEASIBLE
    res = sel.result
    doc = {
        "kind": "phase1",
        "status": res.status.value,
        "subset": sel.ids,
        "total_value": sel.total_value,
        "space": cfg.space.to_json(),
        "assets": [a.to_json() for a in sel.subset],
        "placement": res.placement.to_json(),
        "coordinates": _coordinates(res.placement),
        "report": res.report.to_json(),
        "restart": res.restart,
        "trace": [[i, p] for i, p in res.trace],
        "attempts": [[list(ids), status] for ids, status in sel.attempts],
    }
    return doc, EXIT_OK


def _placement_doc(data: Mapping) -> Mapping:
    if "placement" in data:
        data = data["placement"]
    if data is None or not isinstance(data, Mapping):
        raise ConfigError("placement must be an object mapping asset id to {tx, ty, theta}")
    return data


def run_phase2(cfg: ProjectConfig, phase1_doc: Mapping) -> tuple[dict, int]:
    if phase1_doc.get("status") != "Feasible":
        raise InfeasiblePlacement(f"phase-1 result has status {phase1_doc.get('status')!r}")
    by_id = {a.id: a for a in cfg.assets}
    try:
        subset = [by_id[i] for i in phase1_doc["subset"]]
        placement = Placement.from_json(subset, _placement_doc(phase1_doc))
    except (KeyError, TypeError, AssetError) as exc:
        raise ConfigError(f"phase-1 result does not match the config: {exc}") from exc
    result = optimize_connectivity(
        subset, placement, cfg.space, cfg.phase2_solver or cfg.solver, cfg.eps, cfg.delta_tol
    )
    report = feasibility_report(result.placement, subset, cfg.space, cfg.eps, cfg.delta_tol)
    doc = {
        "kind": "phase2",
        "subset": [a.id for a in subset],
        "space": cfg.space.to_json(),
        "assets": [a.to_json() for a in subset],
        "coordinates": _coordinates(result.placement),
        "report": report.to_json(),
        **result.to_json(),
    }
    return doc, EXIT_OK


def run_validate(cfg: ProjectConfig, placement_doc: Mapping) -> tuple[dict, int]:
    poses = _placement_doc(placement_doc)
    by_id = {a.id: a for a in cfg.assets}
    unknown = [i for i in poses if i not in by_id]
    if unknown:
        raise ConfigError(f"placement references assets not in the config: {unknown}")
    subset = [by_id[i] for i in poses]
    try:
        placement = Placement.from_json(subset, poses)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed pose record: {exc}") from exc
    report = feasibility_report(placement, subset, cfg.space, cfg.eps, cfg.delta_tol)
    return report.to_json(), EXIT_OK if report.feasible else EXIT_INVALID


# -- argument handling -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(doc: Mapping, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_json(path: str) -> Mapping:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_group(text: str) -> tuple[str, list[str]]:
    name, sep, ways = text.partition(":")
    way_ids = [w.strip() for w in ways.split(",") if w.strip()]
    if not sep or not name or not way_ids:
        raise argparse.ArgumentTypeError(f"expected NAME:WAY[,WAY...], got {text!r}")
    return name, way_ids


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="xcity", description=__doc__.splitlines()[0])
    p.add_argument("--verbose", "-v", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="project config JSON")
        sp.add_argument("--out", help="write JSON here instead of stdout")
        sp.add_argument("--seed", type=int, help="override solver seed")
        sp.add_argument("--time-budget", type=float, help="override solver time budget (s)")
        sp.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    sp = sub.add_parser("ingest", help="cut road assets out of an .osm file")
    sp.add_argument("osm", help="input .osm XML")
    sp.add_argument("--group", action="append", type=_parse_group, default=[], metavar="NAME:WAY,...")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--simplify-tol", type=float, default=1.0)
    sp.add_argument("--value", type=float, default=1.0)
    sp.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    sp = sub.add_parser("phase1", help="select and place the most valuable feasible subset")
    common(sp)

    sp = sub.add_parser("phase2", help="maximize direct connectivity of a phase-1 result")
    sp.add_argument("phase1_result")
    common(sp)

    sp = sub.add_parser("validate", help="check a placement against the constraints")
    sp.add_argument("placement")
    common(sp)

    sp = sub.add_parser("render", help="draw a result as SVG")
    sp.add_argument("result")
    sp.add_argument("--out", required=True, help="output .svg path")
    sp.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return _dispatch(parser, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _dispatch(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    if args.command == "ingest":
        if not args.group:
            parser.error("ingest needs at least one --group NAME:WAY,...")
        try:
            graph = load_osm(args.osm)
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            for name, way_ids in args.group:
                try:
                    asset = extract_asset(graph, way_ids, args.simplify_tol, name, args.value)
                except (OsmError, AssetError) as exc:
                    raise OsmError(f"{args.osm}: ways {way_ids}: {exc}") from exc
                save_asset(asset, out_dir / f"{name}.json")
                print(f"{name}: {asset.n_nodes} nodes, {asset.n_segments} segments", file=sys.stderr)
        except (OsmError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK

    if args.command == "render":
        doc = _read_json(args.result)
        if "space" not in doc:
            raise ConfigError(f"{args.result}: result has no 'space'")
        Path(args.out).write_text(render_result(doc), encoding="utf-8")
        return EXIT_OK

    cfg = ProjectConfig.load(args.config).with_overrides(args.seed, args.time_budget)
    if args.command == "phase1":
        doc, code = run_phase1(cfg)
        _dump(doc, args.out)
        if code == EXIT_OK:
            print(f"phase1: placed {doc['subset']} (value {doc['total_value']:g})", file=sys.stderr)
        else:
            print("phase1: no feasible subset found within budget", file=sys.stderr)
        return code
    if args.command == "phase2":
        try:
            doc, code = run_phase2(cfg, _read_json(args.phase1_result))
        except InfeasiblePlacement as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        _dump(doc, args.out)
        print(f"phase2: direct connectivity C = {doc['C']}", file=sys.stderr)
        return code
    if args.command == "validate":
        doc, code = run_validate(cfg, _read_json(args.placement))
        _dump(doc, args.out)
        print("feasible" if code == EXIT_OK else "infeasible", file=sys.stderr)
        return code
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
