from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from xcity.assets import RoadAsset, load_asset
from xcity.geometry import Space

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"


def segments_intersect_exact(p, q) -> bool:
    """Parametric intersection in exact rational arithmetic (touching counts)."""
    (x1, y1), (x2, y2) = [(Fraction(a), Fraction(b)) for a, b in p]
    (x3, y3), (x4, y4) = [(Fraction(a), Fraction(b)) for a, b in q]
    rx, ry = x2 - x1, y2 - y1
    sx, sy = x4 - x3, y4 - y3
    den = rx * sy - ry * sx
    qpx, qpy = x3 - x1, y3 - y1
    if den != 0:
        t = (qpx * sy - qpy * sx) / den
        u = (qpx * ry - qpy * rx) / den
        return 0 <= t <= 1 and 0 <= u <= 1
    if qpx * ry - qpy * rx != 0:
        return False  # parallel, distinct lines
    rr = rx * rx + ry * ry
    t0 = (qpx * rx + qpy * ry) / rr
    t1 = ((x4 - x1) * rx + (y4 - y1) * ry) / rr
    lo, hi = min(t0, t1), max(t0, t1)
    return hi >= 0 and lo <= 1


def segment(aid, length, value=1.0):
    return RoadAsset(aid, [(0, 0), (length, 0)], [(0, 1)], value)


def tee(aid, w=0.5, h=0.35, value=1.0):
    return RoadAsset(aid, [(0, 0), (w, 0), (w / 2, 0), (w / 2, h)], [(0, 2), (1, 2), (2, 3)], value)


def elbow(aid, a=0.4, value=1.0):
    return RoadAsset(aid, [(0, 0), (a, 0), (a, a)], [(0, 1), (1, 2)], value)


def cross(aid, a=0.5, value=1.0):
    """Two crossing diagonals of an a-by-a square, no center node."""
    return RoadAsset(aid, [(0, 0), (a, a), (0, a), (a, 0)], [(0, 1), (2, 3)], value)


def square_loop(aid, a, value=1.0):
    return RoadAsset(aid, [(0, 0), (a, 0), (a, a), (0, a)], [(0, 1), (1, 2), (2, 3), (0, 3)], value)


def random_asset(rng: np.random.Generator, aid: str, n: int | None = None, span: float = 10.0) -> RoadAsset:
    """Random path/tree asset with well-separated nodes and a non-collinear third node."""
    n = n or int(rng.integers(3, 9))
    while True:
        pts = rng.uniform(-span, span, size=(n, 2))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)) + np.eye(n) * 1e9
        if d.min() < 0.05 * span:
            continue
        w = (pts[1, 0] - pts[0, 0]) * (pts[2:, 1] - pts[0, 1]) - (pts[1, 1] - pts[0, 1]) * (pts[2:, 0] - pts[0, 0])
        if np.abs(w).max() < 0.01 * span**2:
            continue
        break
    segs = [(int(rng.integers(k)), k) for k in range(1, n)]
    return RoadAsset(aid, pts.tolist(), segs, float(rng.integers(1, 10)))


UNIT = Space.rectangle(1.0, 1.0)
WIDE = Space.rectangle(2.0, 1.0)

#: (name, assets, space, grid xy step, grid angle step)
TINY_SUITE = [
    ("short-segment", [segment("s", 0.5)], UNIT, 0.1, math.pi / 8),
    ("diagonal-segment", [segment("s", 1.3)], UNIT, 0.1, math.pi / 8),
    ("overlong-segment", [segment("s", 1.5)], UNIT, 0.1, math.pi / 8),
    ("two-segments", [segment("a", 0.5), segment("b", 0.5)], UNIT, 0.1, math.pi / 8),
    ("two-square-loops", [square_loop("a", 0.6), square_loop("b", 0.6)], UNIT, 0.1, math.pi / 8),
    ("tee-and-segment", [tee("t"), segment("s", 0.5)], UNIT, 0.1, math.pi / 8),
    ("two-crosses", [cross("a", 0.4), cross("b", 0.4)], UNIT, 0.1, math.pi / 8),
    ("loop-and-segment", [square_loop("q", 0.6), segment("s", 0.3)], UNIT, 0.1, math.pi / 8),
    ("two-tees-wide", [tee("a", 0.8, 0.5), tee("b", 0.8, 0.5)], WIDE, 0.2, math.pi / 8),
    ("overlong-in-wide", [segment("a", 2.5), segment("b", 0.5)], WIDE, 0.2, math.pi / 8),
]

#: (name, assets, space, grid xy step, grid angle step); connectivity cases
TINY_CONNECT_SUITE = [
    ("two-segments", [segment("a", 0.3), segment("b", 0.3)], UNIT, 0.1, math.pi / 8),
    ("single-asset", [tee("t")], UNIT, 0.1, math.pi / 8),
    ("tee-and-segment", [tee("t", 0.4, 0.3), segment("s", 0.3)], UNIT, 0.1, math.pi / 8),
    ("loop-and-segment", [square_loop("q", 0.4), segment("s", 0.3)], UNIT, 0.1, math.pi / 8),
    ("cross-and-segment", [cross("x", 0.3), segment("s", 0.3)], UNIT, 0.1, math.pi / 8),
    ("two-tees-wide", [tee("a", 0.6, 0.4), tee("b", 0.6, 0.4)], WIDE, 0.2, math.pi / 8),
    ("two-elbows", [elbow("a", 0.3), elbow("b", 0.3)], UNIT, 0.1, math.pi / 8),
    ("two-loops", [square_loop("a", 0.3), square_loop("b", 0.3)], UNIT, 0.1, math.pi / 8),
    ("segment-and-cross-wide", [segment("s", 0.8), cross("x", 0.5)], WIDE, 0.2, math.pi / 8),
    ("tee-and-elbow", [tee("t", 0.4, 0.3), elbow("e", 0.3)], UNIT, 0.1, math.pi / 8),
]


@pytest.fixture
def preliminary_assets():
    return [load_asset(FIXTURES / "preliminary" / f"{n}.json") for n in ("tee", "elbow", "straight")]


@pytest.fixture
def mcity_assets():
    return [load_asset(FIXTURES / "mcity" / f"{n}.json") for n in ("roundabout", "four_way", "curve_merge")]
