"""Evaluation of the single-asset, cross-asset and containment constraints.

The checks here are the ground truth for feasibility. Solvers call the same
vectorized kernels, so a zero penalty and a feasible report coincide exactly.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .assets import Placement, RoadAsset, boundary_nodes
from .geometry import COLLINEAR_TOL, DEFAULT_EPS, Space, collinear_pair

DEFAULT_DELTA_TOL = 1e-6


class ContractError(ValueError):
    """Inputs violate an operation's preconditions."""


def orient_v(ax, ay, bx, by, cx, cy):
    """Elementwise orientation; same operation order as ``geometry.orientation``."""
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


# -- single asset --------------------------------------------------------------


@dataclass
class SacsResidual:
    """Distance slacks and orientation margins for the anchor triplets.

    ``deltas`` is ordered [d12, d13, d23, d14, d24, ...]; ``orientation_margins``
    has one entry per node k >= 3 and must be <= 0.
    """

    deltas: np.ndarray
    orientation_margins: np.ndarray

    @property
    def max_abs_delta(self) -> float:
        return float(np.abs(self.deltas).max()) if self.deltas.size else 0.0

    @property
    def max_margin(self) -> float:
        return float(self.orientation_margins.max()) if self.orientation_margins.size else -math.inf

    @classmethod
    def concat(cls, parts: Sequence["SacsResidual"]) -> "SacsResidual":
        if not parts:
            return cls(np.zeros(0), np.zeros(0))
        return cls(
            np.concatenate([p.deltas for p in parts]),
            np.concatenate([p.orientation_margins for p in parts]),
        )


def _orientation_flags(asset: RoadAsset) -> np.ndarray:
    """+1 for CCW anchor triples, -1 for CW, 0 for collinear (constraint vacuous)."""
    o = asset.coords
    if len(o) < 3:
        return np.zeros(0)
    w = orient_v(o[0, 0], o[0, 1], o[1, 0], o[1, 1], o[2:, 0], o[2:, 1])
    flags = np.zeros(len(w))
    flags[w > COLLINEAR_TOL] = 1.0
    flags[w < -COLLINEAR_TOL] = -1.0
    return flags


def sacs_residual(asset: RoadAsset, coords) -> SacsResidual:
    x = np.asarray(coords, dtype=float).reshape(-1, 2)
    if len(x) != asset.n_nodes:
        raise ContractError(f"{asset.id}: expected {asset.n_nodes} coordinates, got {len(x)}")
    o = asset.coords

    def d2(p, i, j):
        dx = p[j, 0] - p[i, 0]
        dy = p[j, 1] - p[i, 1]
        return dx * dx + dy * dy

    n = asset.n_nodes
    deltas = np.empty(2 * n - 3)
    deltas[0] = d2(x, 0, 1) - d2(o, 0, 1)
    if n > 2:
        k = np.arange(2, n)
        deltas[1::2] = d2(x, 0, k) - d2(o, 0, k)
        deltas[2::2] = d2(x, 1, k) - d2(o, 1, k)
        w = orient_v(x[0, 0], x[0, 1], x[1, 0], x[1, 1], x[2:, 0], x[2:, 1])
        # (-1)^b * w with b = 1 for CCW originals; collinear originals pinned to 0
        margins = -_orientation_flags(asset) * w
    else:
        margins = np.zeros(0)
    return SacsResidual(deltas, margins)


# -- cross asset ---------------------------------------------------------------


class SegmentIndex:
    """Flattened node/segment tables for a fixed, ordered list of assets."""

    def __init__(self, assets: Sequence[RoadAsset]):
        self.assets = list(assets)
        self.ids = [a.id for a in self.assets]
        offsets = np.cumsum([0] + [a.n_nodes for a in self.assets])
        self.node_offsets = offsets
        self.n_nodes = int(offsets[-1])
        seg_a, seg_b, owner, local = [], [], [], []
        for k, a in enumerate(self.assets):
            for s, (i, j) in enumerate(a.segments):
                seg_a.append(offsets[k] + i)
                seg_b.append(offsets[k] + j)
                owner.append(k)
                local.append(s)
        self.seg_a = np.array(seg_a, dtype=int)
        self.seg_b = np.array(seg_b, dtype=int)
        self.seg_owner = np.array(owner, dtype=int)
        self.seg_local = np.array(local, dtype=int)
        pi, pj = [], []
        m = len(seg_a)
        for p in range(m):
            for q in range(p + 1, m):
                if owner[p] != owner[q]:
                    pi.append(p)
                    pj.append(q)
        self.pair_p = np.array(pi, dtype=int)
        self.pair_q = np.array(pj, dtype=int)

    def stack(self, placement: Placement) -> np.ndarray:
        if not placement.covers(self.assets):
            missing = [a.id for a in self.assets if a.id not in placement.poses]
            raise ContractError(f"placement does not cover assets {missing}")
        if not self.assets:
            return np.zeros((0, 2))
        return np.concatenate([placement.coords[a.id] for a in self.assets])


def chi_products(world: np.ndarray, index: SegmentIndex) -> tuple[np.ndarray, np.ndarray]:
    """Intersection-test products for every cross-asset segment pair.

    Returns ``(chi(L_p, l_q), chi(L_q, l_p))`` aligned with ``index.pair_p``.
    """
    pa = world[index.seg_a[index.pair_p]]
    pb = world[index.seg_b[index.pair_p]]
    qa = world[index.seg_a[index.pair_q]]
    qb = world[index.seg_b[index.pair_q]]
    o1 = orient_v(pa[:, 0], pa[:, 1], pb[:, 0], pb[:, 1], qa[:, 0], qa[:, 1])
    o2 = orient_v(pa[:, 0], pa[:, 1], pb[:, 0], pb[:, 1], qb[:, 0], qb[:, 1])
    o3 = orient_v(qa[:, 0], qa[:, 1], qb[:, 0], qb[:, 1], pa[:, 0], pa[:, 1])
    o4 = orient_v(qa[:, 0], qa[:, 1], qb[:, 0], qb[:, 1], pb[:, 0], pb[:, 1])
    return o1 * o2, o3 * o4


def colliding_pairs(world: np.ndarray, index: SegmentIndex, eps: float) -> np.ndarray:
    chi_pq, chi_qp = chi_products(world, index)
    return ~((chi_pq >= eps) | (chi_qp >= eps))


class CacsViolation(NamedTuple):
    asset_i: str
    seg_p: int
    asset_j: str
    seg_q: int


def cacs_check(
    placement: Placement, assets: Sequence[RoadAsset], eps: float = DEFAULT_EPS
) -> list[CacsViolation]:
    """Every cross-asset segment pair failing the disjointness test.

    Pairs are reported with the assets sorted by id, so the result does not
    depend on the order of ``assets``.
    """
    if eps <= 0:
        raise ContractError("eps must be positive")
    ordered = sorted(assets, key=lambda a: a.id)
    index = SegmentIndex(ordered)
    world = index.stack(placement)
    hit = np.flatnonzero(colliding_pairs(world, index, eps))
    out = []
    for h in hit:
        p, q = index.pair_p[h], index.pair_q[h]
        out.append(
            CacsViolation(
                index.ids[index.seg_owner[p]],
                int(index.seg_local[p]),
                index.ids[index.seg_owner[q]],
                int(index.seg_local[q]),
            )
        )
    return out


# -- containment ---------------------------------------------------------------


def edge_orientations(points: np.ndarray, space: Space) -> np.ndarray:
    """Orientation of each point against each space edge, shape (n_points, n_edges)."""
    v = np.array(space.vertices)
    a = v
    b = np.roll(v, -1, axis=0)
    return orient_v(
        a[None, :, 0], a[None, :, 1], b[None, :, 0], b[None, :, 1], points[:, None, 0], points[:, None, 1]
    )


def inside_mask(points: np.ndarray, space: Space) -> np.ndarray:
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    return (edge_orientations(points, space) >= -space.tol).all(axis=1)


def outside_distances(points: np.ndarray, space: Space) -> np.ndarray:
    """Distance from each point to the polygon boundary (caller masks inside points)."""
    v = np.array(space.vertices)
    a = v[None, :, :]
    d = np.roll(v, -1, axis=0)[None, :, :] - a
    rel = points[:, None, :] - a
    t = np.clip((rel * d).sum(-1) / (d * d).sum(-1), 0.0, 1.0)
    diff = rel - t[..., None] * d
    return np.sqrt((diff**2).sum(-1)).min(axis=1)


class NodeRef(NamedTuple):
    asset: str
    node: int


def containment_check(placement: Placement, assets: Sequence[RoadAsset], space: Space) -> list[NodeRef]:
    out = []
    for a in sorted(assets, key=lambda a: a.id):
        if a.id not in placement.coords:
            raise ContractError(f"placement does not cover asset {a.id!r}")
        ok = inside_mask(np.asarray(placement.coords[a.id]), space)
        out.extend(NodeRef(a.id, int(k)) for k in np.flatnonzero(~ok))
    return out


# -- report --------------------------------------------------------------------


@dataclass
class FeasibilityReport:
    feasible: bool
    sacs: SacsResidual
    orientation_violations: list[NodeRef]
    cacs_violations: list[CacsViolation]
    containment_violations: list[NodeRef]
    warnings: list[str] = field(default_factory=list)
    delta_tol: float = DEFAULT_DELTA_TOL

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "max_abs_delta": self.sacs.max_abs_delta,
            "max_orientation_margin": (
                self.sacs.max_margin if self.sacs.orientation_margins.size else None
            ),
            "delta_tol": self.delta_tol,
            "orientation_violations": [[v.asset, v.node + 1] for v in self.orientation_violations],
            "cacs_violations": [
                [v.asset_i, v.seg_p + 1, v.asset_j, v.seg_q + 1] for v in self.cacs_violations
            ],
            "containment_violations": [[v.asset, v.node + 1] for v in self.containment_violations],
            "warnings": list(self.warnings),
        }

    def summary(self) -> str:
        if self.feasible:
            return "feasible"
        parts = []
        if self.sacs.max_abs_delta > self.delta_tol:
            parts.append(f"max |delta| {self.sacs.max_abs_delta:.3g} > {self.delta_tol:g}")
        if self.orientation_violations:
            parts.append(f"{len(self.orientation_violations)} orientation violation(s)")
        if self.cacs_violations:
            parts.append(f"{len(self.cacs_violations)} colliding segment pair(s)")
        if self.containment_violations:
            parts.append(f"{len(self.containment_violations)} node(s) outside the space")
        return "infeasible: " + ", ".join(parts)


def feasibility_report(
    placement: Placement,
    assets: Sequence[RoadAsset],
    space: Space,
    eps: float = DEFAULT_EPS,
    delta_tol: float = DEFAULT_DELTA_TOL,
) -> FeasibilityReport:
    ordered = sorted(assets, key=lambda a: a.id)
    parts = []
    orient_bad = []
    for a in ordered:
        if a.id not in placement.coords:
            raise ContractError(f"placement does not cover asset {a.id!r}")
        r = sacs_residual(a, placement.coords[a.id])
        parts.append(r)
        orient_bad.extend(NodeRef(a.id, int(k) + 2) for k in np.flatnonzero(r.orientation_margins > 0))
    sacs = SacsResidual.concat(parts)
    cacs = cacs_check(placement, ordered, eps)
    outside = containment_check(placement, ordered, space)
    warnings = []
    by_id = {a.id: a for a in ordered}
    for v in cacs:
        p = _segment_coords(placement, by_id[v.asset_i], v.seg_p)
        q = _segment_coords(placement, by_id[v.asset_j], v.seg_q)
        if collinear_pair(p, q) and not _collinear_overlap(p, q):
            warnings.append(
                f"segments {v.asset_i}#{v.seg_p + 1} and {v.asset_j}#{v.seg_q + 1} are collinear "
                "without overlap; counted as colliding, nudge one asset slightly"
            )
    feasible = (
        sacs.max_abs_delta <= delta_tol and not orient_bad and not cacs and not outside
    )
    return FeasibilityReport(feasible, sacs, orient_bad, cacs, outside, warnings, delta_tol)


def _segment_coords(placement: Placement, asset: RoadAsset, s: int):
    i, j = asset.segments[s]
    c = placement.coords[asset.id]
    return (tuple(c[i]), tuple(c[j]))


def _collinear_overlap(p, q) -> bool:
    d = (p[1][0] - p[0][0], p[1][1] - p[0][1])

    def t(x):
        return (x[0] - p[0][0]) * d[0] + (x[1] - p[0][1]) * d[1]

    lo_p, hi_p = sorted((0.0, t(p[1])))
    lo_q, hi_q = sorted((t(q[0]), t(q[1])))
    return hi_q >= lo_p and lo_q <= hi_p


# -- model size ----------------------------------------------------------------


class Phase(enum.Enum):
    PHASE1 = "phase1"
    PHASE2 = "phase2"


class ConstraintItem(NamedTuple):
    family: str
    refs: tuple


def emit_constraints(assets: Sequence[RoadAsset], phase: Phase = Phase.PHASE1) -> Iterator[ConstraintItem]:
    """Yield one object per constraint or binary variable of the algebraic model.

    Families: ``dist``, ``orient`` (single asset); ``cacs_ineq``, ``cacs_bin``
    (cross asset); ``conn_ineq``, ``conn_bin`` (phase 2 connectivity).
    """
    for a in assets:
        yield ConstraintItem("dist", (a.id, 0, 1))
        for k in range(2, a.n_nodes):
            yield ConstraintItem("dist", (a.id, 0, k))
            yield ConstraintItem("dist", (a.id, 1, k))
            yield ConstraintItem("orient", (a.id, k))
    for ai, aj in itertools.combinations(assets, 2):
        for p in range(ai.n_segments):
            for q in range(aj.n_segments):
                for side in (1, 2):
                    yield ConstraintItem("cacs_ineq", (ai.id, p, aj.id, q, side))
                    yield ConstraintItem("cacs_bin", (ai.id, p, aj.id, q, side))
    if phase is not Phase.PHASE2:
        return
    segments = [(a.id, s, seg) for a in assets for s, seg in enumerate(a.segments)]
    for ai, aj in itertools.combinations(assets, 2):
        yield ConstraintItem("conn_bin", ("dc", ai.id, aj.id))
        for bp in sorted(boundary_nodes(ai)):
            for bq in sorted(boundary_nodes(aj)):
                tr = (ai.id, bp, aj.id, bq)
                yield ConstraintItem("conn_bin", ("tr",) + tr)
                for aid, s, (u, v) in segments:
                    shares = (aid == ai.id and bp in (u, v)) or (aid == aj.id and bq in (u, v))
                    if shares:
                        continue
                    for side in (1, 2):
                        yield ConstraintItem("conn_ineq", tr + (aid, s, side))
                        yield ConstraintItem("conn_bin", ("aux",) + tr + (aid, s, side))


@dataclass(frozen=True)
class ConstraintCounts:
    dist: int = 0
    orient: int = 0
    cacs_ineq: int = 0
    cacs_bin: int = 0
    conn_ineq: int = 0
    conn_bin: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


def count_constraints(assets: Sequence[RoadAsset], phase: Phase = Phase.PHASE1) -> ConstraintCounts:
    """Closed-form model size: constraint and binary-variable counts per family."""
    n_l = [a.n_segments for a in assets]
    total_l = sum(n_l)
    cacs = 2 * (math.comb(total_l, 2) - sum(math.comb(x, 2) for x in n_l))
    counts = dict(
        dist=sum(2 * a.n_nodes - 3 for a in assets),
        orient=sum(a.n_nodes - 2 for a in assets),
        cacs_ineq=cacs,
        cacs_bin=cacs,
    )
    if phase is Phase.PHASE2:
        nb = [len(boundary_nodes(a)) for a in assets]
        x = sum(nb[i] * nb[j] for i, j in itertools.combinations(range(len(nb)), 2))
        counts["conn_ineq"] = 2 * x * (total_l - 2)
        counts["conn_bin"] = math.comb(len(assets), 2) + x + 2 * x * (total_l - 2)
    return ConstraintCounts(**counts)
