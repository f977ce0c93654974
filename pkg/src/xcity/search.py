"""Pose-vector state shared by the annealing solvers and the grid oracles.

World coordinates are produced with exactly the float operations used by
:meth:`Placement.build`, so a state that scores zero here also validates
through :func:`constraints.feasibility_report` on the equivalent placement.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assets import Placement, Pose, RoadAsset, wrap_angle
from .constraints import SegmentIndex, chi_products, inside_mask, orient_v, outside_distances
from .geometry import Space

#: lower bound of a single violation's penalty contribution; keeps penalty > 0
#: whenever any check fails
PENALTY_FLOOR = 1e-6


def _cos_sin(theta) -> tuple[np.ndarray, np.ndarray]:
    # libm per element: numpy's vectorized cos may differ in the last bit
    # from math.cos, which Placement.build uses
    theta = np.asarray(theta, dtype=float)
    return (
        np.array([math.cos(t) for t in theta.ravel()]).reshape(theta.shape),
        np.array([math.sin(t) for t in theta.ravel()]).reshape(theta.shape),
    )


def thread_cap(default: int = 1) -> int:
    raw = os.environ.get("XCITY_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass
class PoseState:
    tx: np.ndarray
    ty: np.ndarray
    theta: np.ndarray

    def copy(self) -> "PoseState":
        return PoseState(self.tx.copy(), self.ty.copy(), self.theta.copy())

    def poses(self, ids: Sequence[str]) -> dict[str, Pose]:
        return {aid: Pose(float(x), float(y), float(t)) for aid, x, y, t in zip(ids, self.tx, self.ty, self.theta)}


class PoseModel:
    """Fixed asset list plus everything needed to score a pose vector fast."""

    def __init__(self, assets: Sequence[RoadAsset], space: Space, eps: float):
        self.assets = list(assets)
        self.ids = [a.id for a in self.assets]
        self.space = space
        self.eps = eps
        self.index = SegmentIndex(self.assets)
        self.n = len(self.assets)
        self.orig = (
            np.concatenate([a.coords for a in self.assets]) if self.assets else np.zeros((0, 2))
        )
        self.owner = np.repeat(np.arange(self.n), [a.n_nodes for a in self.assets]).astype(int)
        self.centroids = np.array([a.coords.mean(axis=0) for a in self.assets]).reshape(-1, 2)
        seg_vec = self.orig[self.index.seg_b] - self.orig[self.index.seg_a]
        self.seg_len = np.hypot(seg_vec[:, 0], seg_vec[:, 1])
        self.scale = space.diameter()
        # collisions cost at least sqrt(eps): the clearance the test demands
        # between unit-length segments
        self.collision_floor = max(math.sqrt(eps), PENALTY_FLOOR)

    # -- state helpers -------------------------------------------------------

    def state_from_centers(self, cx, cy, theta) -> PoseState:
        theta = np.array([wrap_angle(float(t)) for t in theta])
        c, s = _cos_sin(theta)
        g = self.centroids
        tx = np.asarray(cx, dtype=float) - (c * g[:, 0] - s * g[:, 1])
        ty = np.asarray(cy, dtype=float) - (s * g[:, 0] + c * g[:, 1])
        return PoseState(tx, ty, theta)

    def state_from_placement(self, placement: Placement) -> PoseState:
        poses = [placement.poses[i] for i in self.ids]
        return PoseState(
            np.array([p.tx for p in poses]), np.array([p.ty for p in poses]), np.array([p.theta for p in poses])
        )

    def centers(self, st: PoseState) -> np.ndarray:
        c, s = _cos_sin(st.theta)
        g = self.centroids
        return np.stack([c * g[:, 0] - s * g[:, 1] + st.tx, s * g[:, 0] + c * g[:, 1] + st.ty], axis=1)

    def world(self, st: PoseState) -> np.ndarray:
        # same operation order as assets._pose_array
        c, s = _cos_sin(st.theta)
        c, s = c[self.owner], s[self.owner]
        x, y = self.orig[:, 0], self.orig[:, 1]
        out = np.empty_like(self.orig)
        out[:, 0] = c * x - s * y + st.tx[self.owner]
        out[:, 1] = s * x + c * y + st.ty[self.owner]
        return out

    def placement(self, st: PoseState) -> Placement:
        return Placement.build(self.assets, st.poses(self.ids))

    # -- scoring -------------------------------------------------------------

    def collision_terms(self, world: np.ndarray) -> np.ndarray:
        """Penetration proxy per cross-asset segment pair, 0 for disjoint pairs."""
        index = self.index
        if len(index.pair_p) == 0:
            return np.zeros(0)
        chi_pq, chi_qp = chi_products(world, index)
        hit = ~((chi_pq >= self.eps) | (chi_qp >= self.eps))
        out = np.zeros(len(hit))
        if not hit.any():
            return out
        p = index.pair_p[hit]
        q = index.pair_q[hit]
        pa, pb = world[index.seg_a[p]], world[index.seg_b[p]]
        qa, qb = world[index.seg_a[q]], world[index.seg_b[q]]
        lp, lq = self.seg_len[p], self.seg_len[q]
        d = np.stack(
            [
                np.abs(orient_v(pa[:, 0], pa[:, 1], pb[:, 0], pb[:, 1], qa[:, 0], qa[:, 1])) / lp,
                np.abs(orient_v(pa[:, 0], pa[:, 1], pb[:, 0], pb[:, 1], qb[:, 0], qb[:, 1])) / lp,
                np.abs(orient_v(qa[:, 0], qa[:, 1], qb[:, 0], qb[:, 1], pa[:, 0], pa[:, 1])) / lq,
                np.abs(orient_v(qa[:, 0], qa[:, 1], qb[:, 0], qb[:, 1], pb[:, 0], pb[:, 1])) / lq,
            ]
        ).min(axis=0)
        out[hit] = np.maximum(d, self.collision_floor)
        return out

    def containment_terms(self, world: np.ndarray) -> np.ndarray:
        out = np.zeros(len(world))
        bad = ~inside_mask(world, self.space)
        if bad.any():
            out[bad] = np.maximum(outside_distances(world[bad], self.space), PENALTY_FLOOR)
        return out

    def energy(self, world: np.ndarray, w_collision: float, w_containment: float) -> float:
        return float(
            w_collision * self.collision_terms(world).sum() + w_containment * self.containment_terms(world).sum()
        )


def pose_grid(asset: RoadAsset, space: Space, step_xy: float, step_theta: float):
    """All grid poses of ``asset`` (centroid on an xy lattice over the space's
    bounding box, angle on a uniform lattice) whose nodes lie inside the space.

    Returns ``(tx, ty, theta, world)`` with ``world`` shaped (P, n_nodes, 2).
    """
    x0, y0, x1, y1 = space.bbox
    xs = np.arange(x0, x1 + 0.5 * step_xy, step_xy)
    ys = np.arange(y0, y1 + 0.5 * step_xy, step_xy)
    n_theta = max(1, int(round(2 * math.pi / step_theta)))
    thetas = np.array([wrap_angle(-math.pi + k * 2 * math.pi / n_theta) for k in range(n_theta)])
    cx, cy, th = np.meshgrid(xs, ys, thetas, indexing="ij")
    cx, cy, th = cx.ravel(), cy.ravel(), th.ravel()
    g = asset.coords.mean(axis=0)
    c, s = _cos_sin(th)
    tx = cx - (c * g[0] - s * g[1])
    ty = cy - (s * g[0] + c * g[1])
    o = asset.coords
    world = np.empty((len(th), asset.n_nodes, 2))
    world[:, :, 0] = c[:, None] * o[None, :, 0] - s[:, None] * o[None, :, 1] + tx[:, None]
    world[:, :, 1] = s[:, None] * o[None, :, 0] + c[:, None] * o[None, :, 1] + ty[:, None]
    ok = inside_mask(world.reshape(-1, 2), space).reshape(len(th), asset.n_nodes).all(axis=1)
    return tx[ok], ty[ok], th[ok], world[ok]
