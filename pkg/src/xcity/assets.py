"""Road assets: rigid node/segment graphs, their poses and placements."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import Point2, Space, distance_sq, orientation, point_segment_distance

#: minimum distance between the two endpoints of an internal segment (m)
MIN_SEGMENT_LEN = 1e-3

__all__ = [
    "AssetError",
    "Placement",
    "Pose",
    "RoadAsset",
    "Space",
    "Violation",
    "apply_pose",
    "boundary_nodes",
    "load_asset",
    "save_asset",
    "simplify_nodes",
    "validate_asset",
    "wrap_angle",
]


class AssetError(ValueError):
    def __init__(self, message: str, violations: Sequence["Violation"] = ()):
        super().__init__(message)
        self.violations = list(violations)


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple[int, ...] = ()
    detail: str = ""

    def __str__(self) -> str:
        where = f" at {list(self.indices)}" if self.indices else ""
        return f"{self.kind}{where}{': ' + self.detail if self.detail else ''}"


@dataclass(frozen=True, eq=False)
class RoadAsset:
    """A rigid road graph. Segment indices are 0-based here, 1-based on disk."""

    id: str
    nodes: tuple[Point2, ...]
    segments: tuple[tuple[int, int], ...]
    value: float = 1.0
    scenario_tags: tuple[str, ...] = ()

    def __init__(
        self,
        id: str,
        nodes: Iterable[Sequence[float]],
        segments: Iterable[Sequence[int]],
        value: float = 1.0,
        scenario_tags: Iterable[str] = (),
    ):
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "nodes", tuple(Point2(*p) for p in nodes))
        object.__setattr__(self, "segments", tuple((int(i), int(j)) for i, j in segments))
        object.__setattr__(self, "value", float(value))
        object.__setattr__(self, "scenario_tags", tuple(scenario_tags))
        object.__setattr__(self, "coords", np.array(self.nodes, dtype=float).reshape(-1, 2))
        self.coords.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def centroid(self) -> tuple[float, float]:
        c = self.coords.mean(axis=0)
        return float(c[0]), float(c[1])

    def degree(self) -> list[int]:
        deg = [0] * self.n_nodes
        for i, j in self.segments:
            deg[i] += 1
            deg[j] += 1
        return deg

    def diameter(self) -> float:
        c = self.coords
        d = c[:, None, :] - c[None, :, :]
        return float(np.sqrt((d**2).sum(axis=-1)).max())

    def width(self) -> float:
        """Minimum width of the node set over all directions; 0 if collinear."""
        hull = _convex_hull(self.nodes)
        if len(hull) < 3:
            return 0.0
        best = math.inf
        for k in range(len(hull)):
            p, q = hull[k], hull[(k + 1) % len(hull)]
            length = math.hypot(q[0] - p[0], q[1] - p[1])
            best = min(best, max(orientation(p, q, v) / length for v in hull))
        return best

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "nodes": [[p.x, p.y] for p in self.nodes],
            "segments": [[i + 1, j + 1] for i, j in self.segments],
            "value": self.value,
            "scenario_tags": list(self.scenario_tags),
        }

    @classmethod
    def from_json(cls, data: Mapping, check: bool = True) -> "RoadAsset":
        try:
            segs = [(int(i) - 1, int(j) - 1) for i, j in data["segments"]]
            asset = cls(
                id=data["id"],
                nodes=data["nodes"],
                segments=[(min(s), max(s)) for s in segs],
                value=data.get("value", 1.0),
                scenario_tags=data.get("scenario_tags", ()),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AssetError(f"malformed asset record: {exc}") from exc
        if check:
            problems = validate_asset(asset)
            if problems:
                raise AssetError(
                    f"asset {asset.id!r} is invalid: " + "; ".join(map(str, problems)), problems
                )
        return asset

    def __repr__(self) -> str:
        return f"RoadAsset({self.id!r}, n={self.n_nodes}, segments={self.n_segments}, value={self.value})"


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi]."""
    return theta - 2.0 * math.pi * math.ceil((theta - math.pi) / (2.0 * math.pi))


@dataclass(frozen=True)
class Pose:
    """Rotation by ``theta`` about the origin, then translation by (tx, ty)."""

    tx: float = 0.0
    ty: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        vals = (float(self.tx), float(self.ty), float(self.theta))
        if not all(math.isfinite(v) for v in vals):
            raise AssetError(f"non-finite pose {vals}")
        object.__setattr__(self, "tx", vals[0])
        object.__setattr__(self, "ty", vals[1])
        object.__setattr__(self, "theta", wrap_angle(vals[2]))

    def to_json(self) -> dict:
        return {"tx": self.tx, "ty": self.ty, "theta": self.theta}

    @classmethod
    def from_json(cls, data: Mapping) -> "Pose":
        return cls(data["tx"], data["ty"], data["theta"])


def _pose_array(coords: np.ndarray, tx: float, ty: float, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    out = np.empty_like(coords)
    out[:, 0] = c * coords[:, 0] - s * coords[:, 1] + tx
    out[:, 1] = s * coords[:, 0] + c * coords[:, 1] + ty
    return out


def apply_pose(asset: RoadAsset, pose: Pose) -> list[Point2]:
    """World coordinates of every node of ``asset`` under ``pose``."""
    return [Point2(x, y) for x, y in _pose_array(asset.coords, pose.tx, pose.ty, pose.theta)]


@dataclass(frozen=True)
class Placement:
    """Poses for a set of assets plus the node coordinates they induce.

    Build through :meth:`build` so that ``coords`` always matches ``poses``.
    """

    poses: Mapping[str, Pose]
    coords: Mapping[str, np.ndarray] = field(repr=False)

    @classmethod
    def build(cls, assets: Sequence[RoadAsset], poses: Mapping[str, Pose]) -> "Placement":
        by_id = {a.id: a for a in assets}
        unknown = set(poses) - set(by_id)
        if unknown:
            raise AssetError(f"placement references unknown assets {sorted(unknown)}")
        coords = {}
        for aid, pose in poses.items():
            arr = _pose_array(by_id[aid].coords, pose.tx, pose.ty, pose.theta)
            arr.flags.writeable = False
            coords[aid] = arr
        return cls(dict(poses), coords)

    @property
    def ids(self) -> list[str]:
        return list(self.poses)

    def covers(self, assets: Sequence[RoadAsset]) -> bool:
        return all(a.id in self.poses for a in assets)

    def to_json(self) -> dict:
        return {aid: pose.to_json() for aid, pose in self.poses.items()}

    @classmethod
    def from_json(cls, assets: Sequence[RoadAsset], data: Mapping) -> "Placement":
        return cls.build(assets, {aid: Pose.from_json(p) for aid, p in data.items()})


def boundary_nodes(asset: RoadAsset) -> set[int]:
    """Indices of nodes incident to exactly one internal segment."""
    return {i for i, d in enumerate(asset.degree()) if d == 1}


def validate_asset(asset: RoadAsset) -> list[Violation]:
    out: list[Violation] = []
    n = asset.n_nodes
    if n < 2:
        out.append(Violation("TooFewNodes", detail=f"{n} node(s), need at least 2"))
    if not asset.segments:
        out.append(Violation("NoSegments"))
    if not (math.isfinite(asset.value) and asset.value >= 0):
        out.append(Violation("BadValue", detail=f"value {asset.value} must be finite and >= 0"))
    seen: set[tuple[int, int]] = set()
    for k, (i, j) in enumerate(asset.segments):
        if not (0 <= i < n and 0 <= j < n):
            out.append(Violation("IndexOutOfRange", (k,), f"segment ({i}, {j})"))
            continue
        if i == j:
            out.append(Violation("SelfLoop", (k,), f"node {i}"))
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            out.append(Violation("DuplicateSegment", key))
        seen.add(key)
        if math.sqrt(distance_sq(asset.nodes[i], asset.nodes[j])) < MIN_SEGMENT_LEN:
            out.append(Violation("CoincidentEndpoints", key))
    if n >= 2 and math.sqrt(distance_sq(asset.nodes[0], asset.nodes[1])) < MIN_SEGMENT_LEN:
        out.append(Violation("AnchorCoincident", (0, 1)))
    return out


def simplify_nodes(nodes: Sequence[Sequence[float]], tol: float) -> list[Point2]:
    """Douglas-Peucker down-sampling of an open polyline; endpoints kept."""
    pts = [Point2(*p) for p in nodes]
    if len(pts) < 2:
        raise AssetError("polyline needs at least 2 points")
    if tol <= 0:
        raise AssetError("tolerance must be positive")
    keep = [False] * len(pts)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        lo, hi = stack.pop()
        worst, worst_d = -1, tol
        for k in range(lo + 1, hi):
            d = point_segment_distance(pts[k], pts[lo], pts[hi])
            if d > worst_d:
                worst, worst_d = k, d
        if worst >= 0:
            keep[worst] = True
            stack.append((lo, worst))
            stack.append((worst, hi))
    return [p for p, k in zip(pts, keep) if k]


def _convex_hull(points: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return pts
    lower: list[tuple[float, float]] = []
    upper: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and orientation(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and orientation(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def load_asset(path: str | Path) -> RoadAsset:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AssetError(f"{path}: invalid JSON: {exc}") from exc
    return RoadAsset.from_json(data)


def save_asset(asset: RoadAsset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(asset.to_json(), indent=2) + "\n", encoding="utf-8")
