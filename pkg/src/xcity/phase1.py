"""Feasible placement search and most-valuable subset selection.

Placement search is multi-start simulated annealing over per-asset poses.
Rigidity holds by construction, so only cross-asset collisions and
containment enter the merit function; every reported success is re-checked
with :func:`constraints.feasibility_report` on a freshly built placement.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from .assets import Placement, Pose, RoadAsset
from .constraints import (
    DEFAULT_DELTA_TOL,
    FeasibilityReport,
    feasibility_report,
    sacs_residual,
)
from .geometry import DEFAULT_EPS, Space
from .search import PENALTY_FLOOR, PoseModel, PoseState, pose_grid, thread_cap

log = logging.getLogger(__name__)

#: slack when comparing asset and space extents in infeasibility certificates
_EXTENT_SLACK = 1e-9


@dataclass
class SearchConfig:
    seed: int = 0
    restarts: int = 8
    iterations: int = 20000
    t0: float = 0.05
    cooling: float = 0.9995
    w_collision: float = 1.0
    w_containment: float = 1.0
    time_budget: float = 60.0
    trace_every: int = 500

    def __post_init__(self) -> None:
        if self.restarts < 1 or self.iterations < 1:
            raise ValueError("restarts and iterations must be >= 1")
        for name in ("t0", "w_collision", "w_containment", "time_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.cooling <= 1:
            raise ValueError("cooling must lie in (0, 1]")

    @classmethod
    def from_json(cls, data: Mapping | None) -> "SearchConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown solver settings {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> dict:
        return asdict(self)


class Phase1Status(enum.Enum):
    FEASIBLE = "Feasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


@dataclass
class Phase1Result:
    status: Phase1Status
    placement: Placement | None
    report: FeasibilityReport | None
    trace: list[tuple[int, float]] = field(default_factory=list)
    best_penalty: float = math.inf
    restart: int | None = None
    diagnostics: list[str] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status is Phase1Status.FEASIBLE

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "placement": self.placement.to_json() if self.placement is not None else None,
            "report": self.report.to_json() if self.report is not None else None,
            "best_penalty": self.best_penalty if math.isfinite(self.best_penalty) else None,
            "restart": self.restart,
            "trace": [[i, p] for i, p in self.trace],
            "diagnostics": list(self.diagnostics),
        }


def penalty(
    placement: Placement,
    assets: Sequence[RoadAsset],
    space: Space,
    w_collision: float = 1.0,
    w_containment: float = 1.0,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> float:
    """Non-negative merit that is zero exactly when the placement is feasible.

    Colliding segment pairs contribute the smallest endpoint-to-line distance
    between them, nodes outside the space their distance to it; each term is
    floored at a small positive constant. Rigidity residuals beyond
    ``delta_tol`` are added with the collision weight.
    """
    ordered = sorted(assets, key=lambda a: a.id)
    model = PoseModel(ordered, space, eps)
    world = model.index.stack(placement)
    total = model.energy(world, w_collision, w_containment)
    for a in ordered:
        r = sacs_residual(a, placement.coords[a.id])
        excess = np.abs(r.deltas)[np.abs(r.deltas) > delta_tol].sum()
        flips = np.maximum(r.orientation_margins[r.orientation_margins > 0], PENALTY_FLOOR).sum()
        total += w_collision * float(excess + flips)
    return total


def infeasibility_certificate(asset: RoadAsset, space: Space) -> str | None:
    """Reason why ``asset`` cannot fit in ``space`` under any pose, if provable."""
    d_a, d_s = asset.diameter(), space.diameter()
    if d_a > d_s + _EXTENT_SLACK:
        return f"asset {asset.id!r} diameter {d_a:.4g} m exceeds space diameter {d_s:.4g} m"
    w_a, w_s = asset.width(), space.width()
    if w_a > w_s + _EXTENT_SLACK:
        return f"asset {asset.id!r} minimum width {w_a:.4g} m exceeds space width {w_s:.4g} m"
    return None


# -- annealing -------------------------------------------------------------------


@dataclass
class _RestartOutcome:
    restart: int
    state: PoseState
    energy: float
    trace: list[tuple[int, float]]
    placement: Placement | None = None
    report: FeasibilityReport | None = None


def _propose(model: PoseModel, st: PoseState, rng: np.random.Generator, frac: float) -> PoseState:
    """One annealing move: translate, rotate, or swap two asset centers."""
    new = st.copy()
    n = model.n
    k = int(rng.integers(n))
    u = rng.random()
    if u < 0.45:
        sigma = model.scale * max(0.25 * frac, 0.002)
        new.tx[k] += rng.normal(0.0, sigma)
        new.ty[k] += rng.normal(0.0, sigma)
    elif u < 0.90 or n < 2:
        centers = model.centers(st)
        sigma = max(math.pi * frac, 0.005)
        theta = float(st.theta[k] + rng.normal(0.0, sigma))
        moved = model.state_from_centers(centers[k : k + 1, 0], centers[k : k + 1, 1], [theta])
        new.tx[k], new.ty[k], new.theta[k] = moved.tx[0], moved.ty[0], moved.theta[0]
    else:
        m = int(rng.integers(n - 1))
        m = m + 1 if m >= k else m
        centers = model.centers(st)
        shift = centers[m] - centers[k]
        new.tx[k] += shift[0]
        new.ty[k] += shift[1]
        new.tx[m] -= shift[0]
        new.ty[m] -= shift[1]
    return new


def _random_state(model: PoseModel, rng: np.random.Generator) -> PoseState:
    x0, y0, x1, y1 = model.space.bbox
    cx = rng.uniform(x0, x1, model.n)
    cy = rng.uniform(y0, y1, model.n)
    theta = rng.uniform(-math.pi, math.pi, model.n)
    return model.state_from_centers(cx, cy, theta)


def _anneal(
    model: PoseModel,
    config: SearchConfig,
    rng: np.random.Generator,
    restart: int,
    deadline: float,
    eps: float,
    delta_tol: float,
) -> _RestartOutcome:
    w_c, w_s = config.w_collision, config.w_containment
    st = _random_state(model, rng)
    e = model.energy(model.world(st), w_c, w_s) / model.scale
    best, best_e = st.copy(), e
    trace = [(0, e)]
    temp = config.t0
    for it in range(1, config.iterations + 1):
        if e == 0.0:
            placement = model.placement(st)
            report = feasibility_report(placement, model.assets, model.space, eps, delta_tol)
            if report.feasible:
                trace.append((it - 1, 0.0))
                return _RestartOutcome(restart, st, 0.0, trace, placement, report)
            log.debug("restart %d: zero merit but validation failed (%s)", restart, report.summary())
        if it % 64 == 0 and time.monotonic() > deadline:
            break
        cand = _propose(model, st, rng, temp / config.t0)
        ce = model.energy(model.world(cand), w_c, w_s) / model.scale
        if ce <= e or rng.random() < math.exp(-(ce - e) / temp):
            st, e = cand, ce
            if e < best_e:
                best, best_e = st.copy(), e
        temp *= config.cooling
        if it % config.trace_every == 0:
            trace.append((it, e))
    return _RestartOutcome(restart, best, best_e, trace)


def search_placement(
    assets: Sequence[RoadAsset],
    space: Space,
    config: SearchConfig | None = None,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> Phase1Result:
    """Find poses mapping every asset into ``space`` without cross collisions."""
    config = config or SearchConfig()
    start = time.monotonic()
    diagnostics = [msg for a in assets if (msg := infeasibility_certificate(a, space))]
    if diagnostics:
        return Phase1Result(Phase1Status.BUDGET_EXHAUSTED, None, None, diagnostics=["provably infeasible"] + diagnostics)
    model = PoseModel(assets, space, eps)
    if not model.assets:
        placement = Placement.build([], {})
        report = feasibility_report(placement, [], space, eps, delta_tol)
        return Phase1Result(Phase1Status.FEASIBLE, placement, report, best_penalty=0.0)

    deadline = start + config.time_budget
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    workers = min(thread_cap(), config.restarts)
    best: _RestartOutcome | None = None

    def run(r: int) -> _RestartOutcome:
        return _anneal(model, config, np.random.default_rng(seeds[r]), r, deadline, eps, delta_tol)

    # batches keep the answer independent of the worker count: the lowest
    # restart index that succeeds wins
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for lo in range(0, config.restarts, workers):
            if time.monotonic() > deadline:
                break
            batch = list(pool.map(run, range(lo, min(lo + workers, config.restarts))))
            for out in batch:
                if out.placement is not None:
                    return Phase1Result(
                        Phase1Status.FEASIBLE,
                        out.placement,
                        out.report,
                        out.trace,
                        0.0,
                        out.restart,
                        elapsed=time.monotonic() - start,
                    )
                if best is None or out.energy < best.energy:
                    best = out
    elapsed = time.monotonic() - start
    if best is None:
        return Phase1Result(
            Phase1Status.BUDGET_EXHAUSTED, None, None, diagnostics=["time budget exhausted before any restart"], elapsed=elapsed
        )
    placement = model.placement(best.state)
    report = feasibility_report(placement, model.assets, space, eps, delta_tol)
    return Phase1Result(
        Phase1Status.BUDGET_EXHAUSTED,
        placement,
        report,
        best.trace,
        best.energy,
        best.restart,
        diagnostics=[f"no feasible placement found; best merit {best.energy:.4g}", report.summary()],
        elapsed=elapsed,
    )


# -- subset selection ------------------------------------------------------------


class NoFeasibleSubset(RuntimeError):
    def __init__(
        self, message: str, attempts: Sequence[tuple[tuple[str, ...], str]] = (), notes: Sequence[str] = ()
    ):
        super().__init__(message)
        self.attempts = list(attempts)
        self.notes = list(notes)  # one line per failed search


@dataclass
class SubsetSelection:
    subset: list[RoadAsset]
    result: Phase1Result
    total_value: float
    attempts: list[tuple[tuple[str, ...], str]] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [a.id for a in self.subset]


def _subset_order(assets: Sequence[RoadAsset]) -> list[tuple[RoadAsset, ...]]:
    subsets = []
    for r in range(1, len(assets) + 1):
        subsets.extend(itertools.combinations(assets, r))
    # highest value first; ties: fewer assets, then lexicographic ids
    return sorted(subsets, key=lambda s: (-sum(a.value for a in s), len(s), sorted(a.id for a in s)))


def select_subset(
    assets: Sequence[RoadAsset],
    space: Space,
    config: SearchConfig | None = None,
    per_subset_budget: float | None = None,
    cap: int = 12,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> SubsetSelection:
    """Most valuable subset the inner search can place.

    Up to ``cap`` assets, subsets are tried in decreasing total value and the
    first one placed wins; supersets of a subset that failed are skipped
    (any placement of a superset restricts to one of the subset). Above the
    cap, assets are inserted greedily by value. The returned value is a lower
    bound on the true optimum since the inner search is incomplete.
    """
    config = config or SearchConfig()
    if per_subset_budget is not None:
        config = SearchConfig(**{**config.to_json(), "time_budget": per_subset_budget})
    ids = [a.id for a in assets]
    if len(set(ids)) != len(ids):
        raise ValueError("asset ids must be unique")
    attempts: list[tuple[tuple[str, ...], str]] = []
    notes: list[str] = []

    def note(label, result: Phase1Result) -> None:
        if not result.feasible:
            notes.append(f"{'+'.join(label)}: " + "; ".join(result.diagnostics))

    if len(assets) <= cap:
        failed: list[frozenset[str]] = []
        for subset in _subset_order(assets):
            key = frozenset(a.id for a in subset)
            label = tuple(sorted(key))
            if any(f <= key for f in failed):
                attempts.append((label, "skipped"))
                continue
            result = search_placement(list(subset), space, config, eps, delta_tol)
            attempts.append((label, result.status.value))
            note(label, result)
            if result.feasible:
                return SubsetSelection(list(subset), result, sum(a.value for a in subset), attempts)
            failed.append(key)
        raise NoFeasibleSubset("no non-empty subset could be placed", attempts, notes)

    chosen: list[RoadAsset] = []
    last: Phase1Result | None = None
    for a in sorted(assets, key=lambda a: (-a.value, a.id)):
        result = search_placement(chosen + [a], space, config, eps, delta_tol)
        label = tuple(sorted(x.id for x in chosen + [a]))
        attempts.append((label, result.status.value))
        note(label, result)
        if result.feasible:
            chosen.append(a)
            last = result
    if last is None:
        raise NoFeasibleSubset("no asset could be placed", attempts, notes)
    return SubsetSelection(chosen, last, sum(a.value for a in chosen), attempts)


# -- brute-force oracle ----------------------------------------------------------

ORACLE_MAX_ASSETS = 2
ORACLE_MAX_NODES = 5


class OracleRefusal(ValueError):
    """Instance too large for exhaustive grid enumeration."""


@dataclass
class OracleVerdict:
    feasible: bool
    placement: Placement | None = None
    grid_points: int = 0


def check_oracle_size(assets: Sequence[RoadAsset]) -> None:
    if len(assets) > ORACLE_MAX_ASSETS:
        raise OracleRefusal(f"oracle handles at most {ORACLE_MAX_ASSETS} assets, got {len(assets)}")
    for a in assets:
        if a.n_nodes > ORACLE_MAX_NODES:
            raise OracleRefusal(f"asset {a.id!r} has {a.n_nodes} nodes; oracle cap is {ORACLE_MAX_NODES}")


def feasible_grid_pairs(assets: Sequence[RoadAsset], space: Space, step_xy: float, step_theta: float, eps: float):
    """Yield chunks of grid pose tuples that pass containment and, for two
    assets, the cross-asset disjointness test.

    A chunk is ``(tx, ty, th)`` for one asset and ``(tx1, ty1, th1, tx2, ty2,
    th2)`` for two, enumerated in lexicographic grid order.
    """
    grids = [pose_grid(a, space, step_xy, step_theta) for a in assets]
    if len(assets) == 1:
        tx, ty, th, _ = grids[0]
        yield tx, ty, th
        return
    (tx1, ty1, th1, w1), (tx2, ty2, th2, w2) = grids
    a1, a2 = assets
    s1 = np.array(a1.segments)
    s2 = np.array(a2.segments)
    chunk = max(1, 200_000 // max(1, len(tx2) * len(s1) * len(s2)))
    for lo in range(0, len(tx1), chunk):
        hi = min(lo + chunk, len(tx1))
        P = w1[lo:hi]
        pa, pb = P[:, s1[:, 0]], P[:, s1[:, 1]]  # (c, m1, 2)
        qa, qb = w2[:, s2[:, 0]], w2[:, s2[:, 1]]  # (P2, m2, 2)
        pa, pb = pa[:, None, :, None, :], pb[:, None, :, None, :]
        qa, qb = qa[None, :, None, :, :], qb[None, :, None, :, :]

        def o(x, y, z):
            return (y[..., 0] - x[..., 0]) * (z[..., 1] - x[..., 1]) - (y[..., 1] - x[..., 1]) * (z[..., 0] - x[..., 0])

        chi_pq = o(pa, pb, qa) * o(pa, pb, qb)
        chi_qp = o(qa, qb, pa) * o(qa, qb, pb)
        ok = ((chi_pq >= eps) | (chi_qp >= eps)).all(axis=(2, 3))  # (c, P2)
        i1, i2 = np.nonzero(ok)
        if len(i1) == 0:
            continue
        g1 = lo + i1
        yield tx1[g1], ty1[g1], th1[g1], tx2[i2], ty2[i2], th2[i2]


def oracle_search_placement(
    assets: Sequence[RoadAsset],
    space: Space,
    step_xy: float,
    step_theta: float,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> OracleVerdict:
    """Exhaustive scan of a pose grid for a feasible placement.

    Each asset's centroid ranges over an xy lattice covering the space's
    bounding box and its angle over a uniform lattice. ``feasible=False`` is a
    certificate only at the given grid resolution.
    """
    if step_xy <= 0 or step_theta <= 0:
        raise ValueError("grid steps must be positive")
    check_oracle_size(assets)
    assets = list(assets)
    if not assets:
        return OracleVerdict(True, Placement.build([], {}))
    for poses in feasible_grid_pairs(assets, space, step_xy, step_theta, eps):
        for k in range(len(poses[0])):
            vals = [float(v[k]) for v in poses]
            placement = Placement.build(
                assets, {a.id: Pose(*vals[3 * i : 3 * i + 3]) for i, a in enumerate(assets)}
            )
            if feasibility_report(placement, assets, space, eps, delta_tol).feasible:
                return OracleVerdict(True, placement)
    return OracleVerdict(False)
