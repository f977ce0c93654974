"""Direct connectivity of a placed asset set and its maximization.

Two placed assets are directly connectible when some straight transition
road between a boundary node of each misses every internal segment, except
the segments it shares a node with.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .assets import Placement, Pose, RoadAsset, boundary_nodes
from .constraints import DEFAULT_DELTA_TOL, cacs_check, feasibility_report, orient_v
from .geometry import DEFAULT_EPS, Space, segments_disjoint
from .phase1 import OracleRefusal, SearchConfig, _propose, check_oracle_size, feasible_grid_pairs
from .search import PoseModel, thread_cap

log = logging.getLogger(__name__)

#: weight of the normalized transition length in the annealing objective; < 1
#: so that it only breaks ties between equal connectivity
LENGTH_WEIGHT = 0.5


class InfeasiblePlacement(ValueError):
    """Connectivity was requested for a placement that fails validation."""


class TransitionCandidate(NamedTuple):
    from_asset: str
    from_node: int
    to_asset: str
    to_node: int


@dataclass
class ConnectivityResult:
    C: int
    connected_pairs: list[tuple[str, str]]
    chosen_transitions: dict[tuple[str, str], TransitionCandidate]
    placement: Placement
    warnings: list[str] = field(default_factory=list)

    def total_length(self) -> float:
        return sum(_length(self.placement, c) for c in self.chosen_transitions.values())

    def to_json(self) -> dict:
        transitions = []
        for (a, b), c in sorted(self.chosen_transitions.items()):
            transitions.append(
                {
                    "pair": [a, b],
                    "from": [c.from_asset, c.from_node + 1],
                    "to": [c.to_asset, c.to_node + 1],
                    "start": [float(v) for v in self.placement.coords[c.from_asset][c.from_node]],
                    "end": [float(v) for v in self.placement.coords[c.to_asset][c.to_node]],
                }
            )
        return {
            "C": self.C,
            "connected_pairs": [list(p) for p in self.connected_pairs],
            "transitions": transitions,
            "placement": self.placement.to_json(),
            "warnings": list(self.warnings),
        }


def _length(placement: Placement, c: TransitionCandidate) -> float:
    a = placement.coords[c.from_asset][c.from_node]
    b = placement.coords[c.to_asset][c.to_node]
    return math.hypot(b[0] - a[0], b[1] - a[1])


def transition_candidates(assets: Sequence[RoadAsset], placement: Placement | None = None) -> list[TransitionCandidate]:
    """All boundary-node pairs across distinct assets, in asset then node order."""
    if placement is not None and not placement.covers(assets):
        raise ValueError("placement does not cover all assets")
    out = []
    for ai, aj in itertools.combinations(assets, 2):
        for p in sorted(boundary_nodes(ai)):
            for q in sorted(boundary_nodes(aj)):
                out.append(TransitionCandidate(ai.id, p, aj.id, q))
    return out


def candidate_valid(
    c: TransitionCandidate,
    assets: Sequence[RoadAsset],
    placement: Placement,
    eps: float = DEFAULT_EPS,
) -> bool:
    by_id = {a.id: a for a in assets}
    for aid, node in ((c.from_asset, c.from_node), (c.to_asset, c.to_node)):
        if node not in boundary_nodes(by_id[aid]):
            raise ValueError(f"node {node + 1} of {aid!r} is not a boundary node")
    start = tuple(placement.coords[c.from_asset][c.from_node])
    end = tuple(placement.coords[c.to_asset][c.to_node])
    if start == end:
        log.warning("degenerate transition %s: coincident endpoints", c)
        return False
    tr = (start, end)
    for a in assets:
        xy = placement.coords[a.id]
        for i, j in a.segments:
            if (a.id == c.from_asset and c.from_node in (i, j)) or (a.id == c.to_asset and c.to_node in (i, j)):
                continue
            if not segments_disjoint(tr, (tuple(xy[i]), tuple(xy[j])), eps):
                return False
    return True


class _CandidateTable:
    """Vectorized validity of every transition candidate against every
    non-exempt internal segment, for a fixed asset list."""

    def __init__(self, assets: Sequence[RoadAsset]):
        self.assets = list(assets)
        self.ids = [a.id for a in self.assets]
        offsets = np.cumsum([0] + [a.n_nodes for a in self.assets])
        self.cands = transition_candidates(self.assets)
        pos = {aid: k for k, aid in enumerate(self.ids)}
        self.start = np.array([offsets[pos[c.from_asset]] + c.from_node for c in self.cands], dtype=int)
        self.end = np.array([offsets[pos[c.to_asset]] + c.to_node for c in self.cands], dtype=int)
        seg_a, seg_b = [], []
        for k, a in enumerate(self.assets):
            for i, j in a.segments:
                seg_a.append(offsets[k] + i)
                seg_b.append(offsets[k] + j)
        self.seg_a = np.array(seg_a, dtype=int)
        self.seg_b = np.array(seg_b, dtype=int)
        # exempt[c, s]: segment s shares an endpoint node with candidate c
        sa, sb = self.seg_a[None, :], self.seg_b[None, :]
        st, en = self.start[:, None], self.end[:, None]
        self.exempt = (sa == st) | (sb == st) | (sa == en) | (sb == en)
        self.pair_of = [(c.from_asset, c.to_asset) for c in self.cands]

    def valid(self, world: np.ndarray, eps: float) -> np.ndarray:
        if not self.cands:
            return np.zeros(0, dtype=bool)
        pa, pb = world[self.start][:, None, :], world[self.end][:, None, :]
        qa, qb = world[self.seg_a][None, :, :], world[self.seg_b][None, :, :]
        o1 = orient_v(pa[..., 0], pa[..., 1], pb[..., 0], pb[..., 1], qa[..., 0], qa[..., 1])
        o2 = orient_v(pa[..., 0], pa[..., 1], pb[..., 0], pb[..., 1], qb[..., 0], qb[..., 1])
        o3 = orient_v(qa[..., 0], qa[..., 1], qb[..., 0], qb[..., 1], pa[..., 0], pa[..., 1])
        o4 = orient_v(qa[..., 0], qa[..., 1], qb[..., 0], qb[..., 1], pb[..., 0], pb[..., 1])
        clear = (o1 * o2 >= eps) | (o3 * o4 >= eps) | self.exempt
        degenerate = (world[self.start] == world[self.end]).all(axis=1)
        return clear.all(axis=1) & ~degenerate

    def summarize(self, world: np.ndarray, eps: float) -> tuple[int, float, list[int]]:
        """(C, total chosen length, index of chosen candidate per connected pair)."""
        ok = self.valid(world, eps)
        chosen: dict[tuple[str, str], int] = {}
        for k in np.flatnonzero(ok):
            chosen.setdefault(self.pair_of[k], int(k))
        idx = list(chosen.values())
        d = world[self.end[idx]] - world[self.start[idx]]
        return len(idx), float(np.hypot(d[:, 0], d[:, 1]).sum()), idx


def _transition_crossings(result: ConnectivityResult, eps: float) -> list[str]:
    out = []
    items = sorted(result.chosen_transitions.items())
    for (pa, ca), (pb, cb) in itertools.combinations(items, 2):
        shared = {(ca.from_asset, ca.from_node), (ca.to_asset, ca.to_node)} & {
            (cb.from_asset, cb.from_node),
            (cb.to_asset, cb.to_node),
        }
        if shared:
            continue
        s1 = (tuple(result.placement.coords[ca.from_asset][ca.from_node]), tuple(result.placement.coords[ca.to_asset][ca.to_node]))
        s2 = (tuple(result.placement.coords[cb.from_asset][cb.from_node]), tuple(result.placement.coords[cb.to_asset][cb.to_node]))
        if not segments_disjoint(s1, s2, eps):
            out.append(f"transitions for {pa} and {pb} cross each other")
    return out


def direct_connectivity(
    assets: Sequence[RoadAsset],
    placement: Placement,
    eps: float = DEFAULT_EPS,
    space: Space | None = None,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> ConnectivityResult:
    """Count asset pairs joined by at least one valid transition.

    The chosen transition of a pair is its first valid candidate in
    (from-node, to-node) order. When ``space`` is given, the placement is
    validated first; without it only cross-asset collisions are checked.
    """
    assets = list(assets)
    if space is not None:
        report = feasibility_report(placement, assets, space, eps, delta_tol)
        if not report.feasible:
            raise InfeasiblePlacement(f"placement is {report.summary()}; run phase 1 first")
    elif cacs_check(placement, assets, eps):
        raise InfeasiblePlacement("placement has colliding segments; run phase 1 first")
    chosen: dict[tuple[str, str], TransitionCandidate] = {}
    for c in transition_candidates(assets, placement):
        key = (c.from_asset, c.to_asset)
        if key in chosen:
            continue
        if candidate_valid(c, assets, placement, eps):
            chosen[key] = c
    pairs = [(a.id, b.id) for a, b in itertools.combinations(assets, 2) if (a.id, b.id) in chosen]
    result = ConnectivityResult(len(pairs), pairs, chosen, placement)
    result.warnings = _transition_crossings(result, eps)
    return result


def optimize_connectivity(
    assets: Sequence[RoadAsset],
    initial: Placement,
    space: Space,
    config: SearchConfig | None = None,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> ConnectivityResult:
    """Anneal poses to maximize direct connectivity from a feasible start.

    Infeasible states are admitted during the walk but always score worse
    than feasible ones; the best feasible placement seen is returned, so the
    result never has lower connectivity than ``initial``. Equal connectivity
    is broken by shorter total transition length.
    """
    config = config or SearchConfig()
    assets = list(assets)
    report = feasibility_report(initial, assets, space, eps, delta_tol)
    if not report.feasible:
        raise InfeasiblePlacement(f"initial placement is {report.summary()}")
    n_pairs = math.comb(len(assets), 2)
    if n_pairs == 0:
        return direct_connectivity(assets, initial, eps, space, delta_tol)

    model = PoseModel(assets, space, eps)
    table = _CandidateTable(assets)
    norm = n_pairs * model.scale

    def score(st) -> tuple[float, int, float]:
        world = model.world(st)
        pen = model.energy(world, config.w_collision, config.w_containment)
        if pen > 0:
            return 1.0 + pen / model.scale, -1, math.inf
        c, length, _ = table.summarize(world, eps)
        return -c + LENGTH_WEIGHT * length / norm, c, length

    start = time.monotonic()
    deadline = start + config.time_budget
    init_state = model.state_from_placement(initial)
    init_score = score(init_state)
    best_key = (-init_score[1], init_score[2], -1)
    best_state = init_state.copy()
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    # once every pair is connected, only the length tie-break remains to improve
    patience = max(200, config.iterations // 20)

    def run(r: int):
        rng = np.random.default_rng(seeds[r])
        st = init_state.copy()
        e, c, length = init_score
        local_key, local_state = (-c, length, r), st.copy()
        temp = config.t0
        last_gain = 0
        for it in range(1, config.iterations + 1):
            if local_key[0] == -n_pairs and it - last_gain > patience:
                break
            if it % 64 == 0 and time.monotonic() > deadline:
                break
            cand = _propose(model, st, rng, temp / config.t0)
            ce, cc, clen = score(cand)
            if ce <= e or rng.random() < math.exp(-(ce - e) / temp):
                st, e = cand, ce
                if cc >= 0 and (-cc, clen, r) < local_key:
                    local_key, local_state = (-cc, clen, r), st.copy()
                    last_gain = it
            temp *= config.cooling
        return local_key, local_state

    workers = min(thread_cap(), config.restarts)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for lo in range(0, config.restarts, workers):
            if time.monotonic() > deadline:
                break
            for key, state in pool.map(run, range(lo, min(lo + workers, config.restarts))):
                if key < best_key:
                    best_key, best_state = key, state
            if best_key[0] == -n_pairs:
                break

    placement = model.placement(best_state)
    result = direct_connectivity(assets, placement, eps, space, delta_tol)
    init_c = init_score[1]
    if result.C < init_c:
        # the pose round trip lost validity on a knife edge; keep the start
        return direct_connectivity(assets, initial, eps, space, delta_tol)
    return result


def oracle_connectivity_max(
    assets: Sequence[RoadAsset],
    space: Space,
    step_xy: float,
    step_theta: float,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> int:
    """Largest connectivity over all feasible placements on a pose grid.

    Returns -1 when no grid placement is feasible.
    """
    if step_xy <= 0 or step_theta <= 0:
        raise ValueError("grid steps must be positive")
    check_oracle_size(assets)
    assets = list(assets)
    if not assets:
        return 0
    upper = math.comb(len(assets), 2)
    table = _CandidateTable(assets)
    best = -1
    for poses in feasible_grid_pairs(assets, space, step_xy, step_theta, eps):
        for k in range(len(poses[0])):
            vals = [float(v[k]) for v in poses]
            placement = Placement.build(assets, {a.id: Pose(*vals[3 * i : 3 * i + 3]) for i, a in enumerate(assets)})
            if not feasibility_report(placement, assets, space, eps, delta_tol).feasible:
                continue
            if not table.cands:
                return 0
            world = np.concatenate([placement.coords[a.id] for a in assets])
            c = int(table.valid(world, eps).any())
            best = max(best, c)
            if best == upper:
                return best
    return best


__all__ = [
    "ConnectivityResult",
    "InfeasiblePlacement",
    "OracleRefusal",
    "TransitionCandidate",
    "candidate_valid",
    "direct_connectivity",
    "optimize_connectivity",
    "oracle_connectivity_max",
    "transition_candidates",
]
