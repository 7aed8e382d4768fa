"""Planar geometry kernel: orientation predicate, proper segment crossing,
monotone-chain convex hull, and convex-vs-convex classification.

Points are plain ``(x, y)`` float tuples. All predicates share one
collinearity band, :data:`EPS_GEOM`, applied to the raw cross product.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EPS_GEOM = 1e-9  # m^2

Point = tuple[float, float]


class Orientation(enum.IntEnum):
    CLOCKWISE = -1
    COLLINEAR = 0
    COUNTERCLOCKWISE = 1


class Relation(enum.Enum):
    DISJOINT = "disjoint"
    EDGE_INTERSECT = "edge_intersect"
    H1_CONTAINS_H2 = "h1_contains_h2"
    H2_CONTAINS_H1 = "h2_contains_h1"


class GeometryError(ValueError):
    pass


def cross(p: Point, q: Point, r: Point) -> float:
    """z-component of ``(q - p) x (r - p)``."""
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def orient(p: Point, q: Point, r: Point) -> Orientation:
    c = cross(p, q, r)
    if c > EPS_GEOM:
        return Orientation.COUNTERCLOCKWISE
    if c < -EPS_GEOM:
        return Orientation.CLOCKWISE
    return Orientation.COLLINEAR


def _sign(c: float) -> int:
    return 1 if c > EPS_GEOM else (-1 if c < -EPS_GEOM else 0)


def segments_intersect(s1: Sequence[Point], s2: Sequence[Point]) -> bool:
    """True iff the two segments cross properly.

    Touching endpoints, T-junctions and collinear overlaps all count as
    *no* intersection, as do zero-length segments.
    """
    a, b = s1
    c, d = s2
    if a == b or c == d:
        return False
    o1 = _sign(cross(a, b, c))
    o2 = _sign(cross(a, b, d))
    if o1 == 0 or o2 == 0 or o1 == o2:
        return False
    o3 = _sign(cross(c, d, a))
    o4 = _sign(cross(c, d, b))
    return o3 != 0 and o4 != 0 and o3 != o4


def segments_touch(s1: Sequence[Point], s2: Sequence[Point]) -> bool:
    """Inclusive intersection test (endpoints and collinear overlap count)."""
    a, b = s1
    c, d = s2
    o1, o2 = _sign(cross(a, b, c)), _sign(cross(a, b, d))
    o3, o4 = _sign(cross(c, d, a)), _sign(cross(c, d, b))
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True
    return ((o1 == 0 and _in_box(a, b, c)) or (o2 == 0 and _in_box(a, b, d))
            or (o3 == 0 and _in_box(c, d, a)) or (o4 == 0 and _in_box(c, d, b)))


def _in_box(p: Point, q: Point, r: Point) -> bool:
    """r within the bounding box of segment pq (r already known collinear)."""
    return (min(p[0], q[0]) - 1e-12 <= r[0] <= max(p[0], q[0]) + 1e-12
            and min(p[1], q[1]) - 1e-12 <= r[1] <= max(p[1], q[1]) + 1e-12)


@dataclass(frozen=True)
class HullPolygon:
    """Convex polygon as counter-clockwise vertices without collinear runs.

    One- and two-point hulls are allowed and represent a point and a
    segment respectively.
    """

    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise GeometryError("hull needs at least one point")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def is_degenerate(self) -> bool:
        return len(self.points) < 3

    def edges(self) -> list[tuple[Point, Point]]:
        pts = self.points
        if len(pts) == 1:
            return []
        if len(pts) == 2:
            return [(pts[0], pts[1])]
        return [(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]

    def area(self) -> float:
        pts = self.points
        if len(pts) < 3:
            return 0.0
        s = 0.0
        for i in range(len(pts)):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % len(pts)]
            s += x1 * y2 - x2 * y1
        return 0.5 * s

    def is_convex(self) -> bool:
        pts = self.points
        n = len(pts)
        if n < 3:
            return True
        return all(cross(pts[i], pts[(i + 1) % n], pts[(i + 2) % n]) > EPS_GEOM for i in range(n))

    def translated(self, dx: float, dy: float) -> "HullPolygon":
        return HullPolygon(tuple((x + dx, y + dy) for x, y in self.points))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)


def convex_hull(points: Iterable[Point] | np.ndarray) -> HullPolygon:
    """Andrew's monotone chain. Vertices start at the lowest-x (then lowest-y)
    point and run counter-clockwise; collinear boundary points are dropped."""
    if isinstance(points, np.ndarray):
        pts = sorted(set(map(tuple, points.tolist())))
    else:
        pts = sorted({(float(x), float(y)) for x, y in points})
    if not pts:
        raise GeometryError("convex hull of an empty point set")
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise GeometryError("non-finite point")
    if len(pts) <= 2:
        return HullPolygon(tuple(pts))

    def half(seq):
        chain: list[Point] = []
        for p in seq:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    # exact-sign chain first: applying the band here would let a near-duplicate
    # point pop a genuine vertex
    hull = half(pts)[:-1] + half(reversed(pts))[:-1]
    # then drop vertices that are collinear with their neighbours within the band
    changed = True
    while changed and len(hull) >= 3:
        changed = False
        n = len(hull)
        for i in range(n):
            if cross(hull[i - 1], hull[i], hull[(i + 1) % n]) <= EPS_GEOM:
                del hull[i]
                changed = True
                break
    if len(hull) < 3:
        # all collinear within the band: keep the extremes along the line
        p0 = pts[0]
        far = max(pts, key=lambda p: (p[0] - p0[0]) ** 2 + (p[1] - p0[1]) ** 2)
        dx, dy = far[0] - p0[0], far[1] - p0[1]
        lo = min(pts, key=lambda p: (p[0] - p0[0]) * dx + (p[1] - p0[1]) * dy)
        hi = max(pts, key=lambda p: (p[0] - p0[0]) * dx + (p[1] - p0[1]) * dy)
        return HullPolygon(tuple(sorted({lo, hi})))
    k = hull.index(min(hull))
    return HullPolygon(tuple(hull[k:] + hull[:k]))


def point_in_convex(p: Point, hull: HullPolygon) -> bool:
    """Inclusive containment: points on the boundary are inside."""
    pts = hull.points
    n = len(pts)
    if n == 1:
        q = pts[0]
        return (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 <= EPS_GEOM
    if n == 2:
        return _sign(cross(pts[0], pts[1], p)) == 0 and _in_box(pts[0], pts[1], p)
    for i in range(n):
        if cross(pts[i], pts[(i + 1) % n], p) < -EPS_GEOM:
            return False
    return True


def _any_proper_crossing(h1: HullPolygon, h2: HullPolygon) -> bool:
    e2 = h2.edges()
    for s1 in h1.edges():
        for s2 in e2:
            if segments_intersect(s1, s2):
                return True
    return False


def _contains_all(outer: HullPolygon, inner: HullPolygon) -> bool:
    return all(point_in_convex(p, outer) for p in inner.points)


def hulls_relate(h1: HullPolygon, h2: HullPolygon) -> Relation:
    """Classify two convex hulls.

    Any proper crossing between an edge of ``h1`` and an edge of ``h2`` wins.
    Otherwise a hull contains the other when every vertex of the other lies
    inside it (boundary inclusive); this keeps hulls that merely share an
    edge or a vertex ``DISJOINT``.
    """
    if _any_proper_crossing(h1, h2):
        return Relation.EDGE_INTERSECT
    if _contains_all(h1, h2):
        return Relation.H1_CONTAINS_H2
    if _contains_all(h2, h1):
        return Relation.H2_CONTAINS_H1
    return Relation.DISJOINT


def edge_contacts(h1: HullPolygon, h2: HullPolygon) -> int:
    """Number of edge pairs that touch without crossing properly.

    These are the collinear/endpoint contacts that :func:`hulls_relate`
    deliberately ignores.
    """
    n = 0
    e2 = h2.edges()
    for s1 in h1.edges():
        for s2 in e2:
            if not segments_intersect(s1, s2) and segments_touch(s1, s2):
                n += 1
    return n


def _axes(h: HullPolygon) -> list[Point]:
    pts = h.points
    if len(pts) == 1:
        return []
    out = []
    for (x1, y1), (x2, y2) in h.edges():
        out.append((y1 - y2, x2 - x1))
    if len(pts) == 2:
        (x1, y1), (x2, y2) = pts
        out.append((x2 - x1, y2 - y1))
    return out


def separation(h1: HullPolygon, h2: HullPolygon) -> float:
    """Signed separating-axis gap between two convex hulls, in metres.

    Positive when the hulls are apart, zero when they touch, negative when
    their interiors overlap (then it is minus the smallest penetration depth
    over the candidate axes).
    """
    axes = _axes(h1) + _axes(h2)
    if not axes:
        (x1, y1), (x2, y2) = h1.points[0], h2.points[0]
        return math.hypot(x2 - x1, y2 - y1)
    best = -math.inf
    for ax, ay in axes:
        n = math.hypot(ax, ay)
        if n == 0.0:
            continue
        ax, ay = ax / n, ay / n
        p1 = [x * ax + y * ay for x, y in h1.points]
        p2 = [x * ax + y * ay for x, y in h2.points]
        gap = max(min(p2) - max(p1), min(p1) - max(p2))
        best = max(best, gap)
    return best


def oriented_rectangle(center: Point, heading: float, length: float, width: float) -> HullPolygon:
    """Rectangle with its long axis along ``heading``; corners counter-clockwise
    starting at rear-right."""
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    cx, cy = center
    corners = []
    for lx, ly in ((-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)):
        corners.append((cx + lx * c - ly * s, cy + lx * s + ly * c))
    return HullPolygon(tuple(corners))


_UNIT_LON = np.array([-0.5, 0.5, 0.5, -0.5])
_UNIT_LAT = np.array([-0.5, -0.5, 0.5, 0.5])


def rectangle_corners(centers: np.ndarray, headings: np.ndarray, length: float, width: float) -> np.ndarray:
    """Vectorized :func:`oriented_rectangle`: ``(n, 4, 2)`` corner array."""
    c = np.cos(headings)[:, None]
    s = np.sin(headings)[:, None]
    lx = _UNIT_LON * length
    ly = _UNIT_LAT * width
    out = np.empty((len(headings), 4, 2))
    out[..., 0] = centers[:, 0:1] + c * lx - s * ly
    out[..., 1] = centers[:, 1:2] + s * lx + c * ly
    return out
