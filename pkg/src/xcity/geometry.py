"""Planar predicates used by every placement constraint.

All arithmetic is plain float64. Orientation values are twice the signed
triangle area, so their scale is (meters)^2; the intersection test is a
product of two of them and therefore scales as (meters)^4.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple, Sequence

#: absolute tolerance on orientation values when classifying collinearity
COLLINEAR_TOL = 1e-9
#: minimum segment length accepted by :class:`Segment2`
DEGENERATE_LEN = 1e-9
#: default offset replacing the strict inequality of the disjointness test
DEFAULT_EPS = 1e-4


class GeometryError(ValueError):
    """Raised for inputs on which a predicate is undefined."""


class _Point2Base(NamedTuple):
    x: float
    y: float


class Point2(_Point2Base):
    """Immutable 2D point in meters. Rejects NaN and infinities."""

    __slots__ = ()

    def __new__(cls, x: float, y: float) -> "Point2":
        x = float(x)
        y = float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError(f"non-finite point ({x}, {y})")
        return super().__new__(cls, x, y)


class Segment2(NamedTuple):
    a: Point2
    b: Point2

    @classmethod
    def of(cls, a: Sequence[float], b: Sequence[float]) -> "Segment2":
        pa, pb = Point2(*a), Point2(*b)
        if math.hypot(pb.x - pa.x, pb.y - pa.y) <= DEGENERATE_LEN:
            raise GeometryError(f"degenerate segment {pa}-{pb}")
        return cls(pa, pb)

    @property
    def length(self) -> float:
        return math.hypot(self.b.x - self.a.x, self.b.y - self.a.y)


class OrientationSign(enum.Enum):
    CCW = "CCW"
    CW = "CW"
    LNR = "LNR"


def orientation(x: Sequence[float], y: Sequence[float], z: Sequence[float]) -> float:
    """Signed determinant of the homogeneous 3x3 matrix of ``x, y, z``.

    Positive when the triple turns counter-clockwise, negative when clockwise,
    zero when collinear. Equals twice the signed triangle area.
    """
    return (y[0] - x[0]) * (z[1] - x[1]) - (y[1] - x[1]) * (z[0] - x[0])


def orientation_sign(
    x: Sequence[float], y: Sequence[float], z: Sequence[float], tol: float = COLLINEAR_TOL
) -> OrientationSign:
    if tol < 0:
        raise GeometryError("tolerance must be non-negative")
    w = orientation(x, y, z)
    if w > tol:
        return OrientationSign.CCW
    if w < -tol:
        return OrientationSign.CW
    return OrientationSign.LNR


def intersection_test(
    line_p1: Sequence[float], line_p2: Sequence[float], seg: Sequence[Sequence[float]]
) -> float:
    """Product of the orientations of both segment endpoints against a line.

    Positive iff both endpoints lie strictly on the same side of the infinite
    line through ``line_p1`` and ``line_p2``.
    """
    if line_p1[0] == line_p2[0] and line_p1[1] == line_p2[1]:
        raise GeometryError("line through coincident points is undefined")
    a, b = seg
    return orientation(line_p1, line_p2, a) * orientation(line_p1, line_p2, b)


def segments_disjoint(
    p: Sequence[Sequence[float]], q: Sequence[Sequence[float]], eps: float = DEFAULT_EPS
) -> bool:
    """True when one segment lies clearly on one side of the other's line.

    Touching segments give a zero product and are reported as colliding, as
    are collinear segments that do not overlap.
    """
    if eps <= 0:
        raise GeometryError("eps must be positive")
    return intersection_test(p[0], p[1], q) >= eps or intersection_test(q[0], q[1], p) >= eps


def collinear_pair(
    p: Sequence[Sequence[float]], q: Sequence[Sequence[float]], tol: float = COLLINEAR_TOL
) -> bool:
    """Both endpoints of ``q`` lie on the line through ``p`` (within ``tol``)."""
    return abs(orientation(p[0], p[1], q[0])) <= tol and abs(orientation(p[0], p[1], q[1])) <= tol


def distance_sq(p: Sequence[float], q: Sequence[float]) -> float:
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    return dx * dx + dy * dy


def point_segment_distance(p: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    den = dx * dx + dy * dy
    if den == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / den
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))


def rotate(p: Sequence[float], theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return (c * p[0] - s * p[1], s * p[0] + c * p[1])


class Space:
    """Convex construction region given by counter-clockwise vertices."""

    def __init__(self, vertices: Sequence[Sequence[float]], tol: float = COLLINEAR_TOL):
        verts = tuple(Point2(*v) for v in vertices)
        if len(verts) < 3:
            raise GeometryError("space needs at least 3 vertices")
        n = len(verts)
        for i in range(n):
            w = orientation(verts[i], verts[(i + 1) % n], verts[(i + 2) % n])
            if w <= tol:
                raise GeometryError(
                    f"space is not strictly convex and counter-clockwise at vertex {(i + 1) % n}"
                )
        self.vertices = verts
        self.tol = tol

    @classmethod
    def rectangle(cls, width: float, height: float, origin: Sequence[float] = (0.0, 0.0)) -> "Space":
        x0, y0 = origin
        return cls([(x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height)])

    @property
    def edges(self) -> list[tuple[Point2, Point2]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    @property
    def centroid(self) -> tuple[float, float]:
        # area-weighted polygon centroid
        a = cx = cy = 0.0
        for p, q in self.edges:
            cross = p.x * q.y - q.x * p.y
            a += cross
            cx += (p.x + q.x) * cross
            cy += (p.y + q.y) * cross
        a *= 0.5
        return (cx / (6 * a), cy / (6 * a))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def diameter(self) -> float:
        v = self.vertices
        return max(math.sqrt(distance_sq(p, q)) for p in v for q in v)

    def width(self) -> float:
        """Minimum width over all directions (attained normal to an edge)."""
        best = math.inf
        for p, q in self.edges:
            length = math.hypot(q.x - p.x, q.y - p.y)
            best = min(best, max(orientation(p, q, v) / length for v in self.vertices))
        return best

    def scaled(self, factor: float) -> "Space":
        cx, cy = self.centroid
        return Space([(cx + factor * (v.x - cx), cy + factor * (v.y - cy)) for v in self.vertices], self.tol)

    def outside_distance(self, p: Sequence[float]) -> float:
        """Euclidean distance from ``p`` to the region, 0 for points inside."""
        if point_in_space(p, self):
            return 0.0
        return min(point_segment_distance(p, a, b) for a, b in self.edges)

    def to_json(self) -> list[list[float]]:
        return [[v.x, v.y] for v in self.vertices]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Space) and self.vertices == other.vertices

    def __repr__(self) -> str:
        return f"Space({[tuple(v) for v in self.vertices]})"


def point_in_space(p: Sequence[float], s: Space) -> bool:
    """Inside-or-on-boundary test against a convex CCW polygon."""
    return all(orientation(a, b, p) >= -s.tol for a, b in s.edges)
