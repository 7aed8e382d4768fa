import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    exact_cross, exact_sign, hull_vertices_bruteforce, min_orientation, proper_crossing_exact,
    relate_shapely,
)
from threatgrid.geometry import (
    EPS_GEOM, GeometryError, HullPolygon, Orientation, Relation, convex_hull, edge_contacts,
    hulls_relate, orient, oriented_rectangle, point_in_convex, rectangle_corners, segments_intersect,
    segments_touch, separation,
)

SQUARE = HullPolygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


def test_orient_examples():
    assert orient((0, 0), (1, 1), (2, 2)) is Orientation.COLLINEAR
    assert orient((0, 0), (1, 0), (1, 1)) is Orientation.COUNTERCLOCKWISE
    assert orient((0, 0), (1, 0), (1, -1)) is Orientation.CLOCKWISE


def test_orient_band():
    assert orient((0, 0), (1, 0), (0.5, 0.5 * EPS_GEOM)) is Orientation.COLLINEAR
    assert orient((0, 0), (1, 0), (0.5, 3 * EPS_GEOM)) is Orientation.COUNTERCLOCKWISE


def test_orient_matches_exact_oracle():
    rng = np.random.default_rng(11)
    pts = rng.uniform(-10, 10, (100_000, 3, 2))
    # a tenth of the triples are pushed near collinearity
    k = 10_000
    t = rng.uniform(0, 1, k)[:, None]
    pts[:k, 2] = pts[:k, 0] + t * (pts[:k, 1] - pts[:k, 0]) + rng.normal(0, 1e-9, (k, 2))
    bad = 0
    for p, q, r in pts.tolist():
        c = exact_cross(p, q, r)
        if abs(c) <= EPS_GEOM * 1.001:
            continue
        bad += int(orient(p, q, r)) != exact_sign(p, q, r)
    assert bad == 0


@pytest.mark.parametrize("s1,s2,expected", [
    (((0, 0), (2, 2)), ((0, 2), (2, 0)), True),
    (((0, 0), (1, 0)), ((0, 1), (1, 1)), False),
    (((0, 0), (2, 0)), ((1, 0), (1, 2)), False),   # T-junction
    (((0, 0), (2, 0)), ((2, 0), (3, 1)), False),   # shared endpoint
    (((0, 0), (2, 0)), ((1, 0), (3, 0)), False),   # collinear overlap
    (((0, 0), (0, 0)), ((-1, -1), (1, 1)), False),  # zero length
])
def test_segments_intersect_examples(s1, s2, expected):
    assert segments_intersect(s1, s2) is expected
    assert segments_intersect(s2, s1) is expected


def test_segments_touch_is_inclusive():
    assert segments_touch(((0, 0), (2, 0)), ((1, 0), (1, 2)))
    assert segments_touch(((0, 0), (2, 0)), ((1, 0), (3, 0)))
    assert not segments_touch(((0, 0), (1, 0)), ((0, 1), (1, 1)))


def test_segments_intersect_matches_exact_oracle():
    rng = np.random.default_rng(5)
    segs = rng.uniform(-5, 5, (20_000, 4, 2)).tolist()
    for a, b, c, d in segs:
        if min_orientation(a, b, c, d) > EPS_GEOM:
            assert segments_intersect((a, b), (c, d)) == proper_crossing_exact(a, b, c, d)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3)), min_size=4, max_size=4))
def test_segments_intersect_exact_on_integer_lattice(p):
    a, b, c, d = [tuple(map(float, q)) for q in p]
    assert segments_intersect((a, b), (c, d)) == proper_crossing_exact(a, b, c, d)
    assert segments_intersect((a, b), (c, d)) == segments_intersect((c, d), (a, b))
    assert segments_intersect((a, b), (c, d)) == segments_intersect((b, a), (d, c))


def test_hull_square_plus_center():
    h = convex_hull([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)])
    assert h.points == ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def test_hull_collinear_is_two_point():
    h = convex_hull([(0, 0), (1, 1), (2, 2)])
    assert h.points == ((0.0, 0.0), (2.0, 2.0))
    assert h.is_degenerate and h.area() == 0.0


def test_hull_single_point_and_duplicates():
    assert convex_hull([(1, 2), (1, 2)]).points == ((1.0, 2.0),)


def test_hull_empty_raises():
    with pytest.raises(GeometryError):
        convex_hull([])


def test_hull_drops_collinear_boundary_points():
    h = convex_hull([(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (0, 2), (0, 1)])
    assert h.points == ((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0))


def test_hull_200_points_vs_bruteforce_spot_check():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (200, 2))
    h = convex_hull(pts)
    assert all(point_in_convex(p, h) for p in pts.tolist())
    # the brute-force oracle is quartic, so check random subsets that
    # always include the claimed vertices
    vertices = set(h.points)
    others = [p for p in pts.tolist() if tuple(p) not in vertices]
    for _ in range(5):
        pick = [others[i] for i in rng.choice(len(others), 8, replace=False)]
        assert hull_vertices_bruteforce(list(vertices) + pick) == vertices


def test_hull_matches_bruteforce_small_sets():
    rng = random.Random(2)
    for _ in range(500):
        n = rng.randint(1, 10)
        if rng.random() < 0.5:
            pts = [(float(rng.randint(0, 4)), float(rng.randint(0, 4))) for _ in range(n)]
        else:
            pts = [(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(n)]
        assert set(convex_hull(pts).points) == hull_vertices_bruteforce(pts)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=1, max_size=30))
def test_hull_properties(pts):
    h = convex_hull(pts)
    assert h.is_convex()
    assert all(point_in_convex(p, h) for p in pts)
    assert convex_hull(list(reversed(pts))) == h
    assert convex_hull(h.points) == h
    if len(h) >= 3:
        assert h.area() > 0
        assert h.points[0] == min(h.points)


def test_point_in_convex():
    assert point_in_convex((0.5, 0.5), SQUARE)
    assert not point_in_convex((2, 2), SQUARE)
    assert point_in_convex((0.5, 0.0), SQUARE)
    assert point_in_convex((1.0, 1.0), SQUARE)
    seg = HullPolygon(((0.0, 0.0), (2.0, 0.0)))
    assert point_in_convex((1.0, 0.0), seg) and not point_in_convex((3.0, 0.0), seg)
    assert not point_in_convex((1.0, 0.1), seg)
    pt = HullPolygon(((1.0, 1.0),))
    assert point_in_convex((1.0, 1.0), pt) and not point_in_convex((1.0, 1.1), pt)


def test_point_in_convex_matches_winding_oracle():
    from shapely.geometry import Point, Polygon

    rng = np.random.default_rng(9)
    for _ in range(200):
        h = convex_hull(rng.uniform(-1, 1, (8, 2)))
        if len(h) < 3:
            continue
        poly = Polygon(h.points)
        for p in rng.uniform(-1.2, 1.2, (20, 2)).tolist():
            if poly.exterior.distance(Point(p)) < 1e-7:
                continue
            assert point_in_convex(p, h) == poly.contains(Point(p))


def test_hulls_relate_examples():
    shifted = SQUARE.translated(0.5, 0.5)
    assert hulls_relate(SQUARE, shifted) is Relation.EDGE_INTERSECT
    small = HullPolygon(((0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)))
    assert hulls_relate(SQUARE, small) is Relation.H1_CONTAINS_H2
    assert hulls_relate(small, SQUARE) is Relation.H2_CONTAINS_H1
    assert hulls_relate(SQUARE, SQUARE.translated(3, 0)) is Relation.DISJOINT


def test_shared_edge_is_disjoint_with_contacts():
    right = SQUARE.translated(1.0, 0.0)
    assert hulls_relate(SQUARE, right) is Relation.DISJOINT
    assert edge_contacts(SQUARE, right) > 0
    assert edge_contacts(SQUARE, SQUARE.translated(5, 0)) == 0


def test_hulls_relate_matches_shapely_oracle():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(10_000):
        h1 = convex_hull(rng.uniform(-1, 1, (rng.integers(3, 9), 2)) * rng.uniform(0.2, 1.5))
        h2 = convex_hull(rng.uniform(-1, 1, (rng.integers(3, 9), 2)) * rng.uniform(0.2, 1.5)
                         + rng.uniform(-1.5, 1.5, 2))
        if min(abs(exact_cross(a, b, p)) for a, b in h1.edges() + h2.edges() for p in h1.points + h2.points
               if p != a and p != b) < 1e-6:
            continue
        assert hulls_relate(h1, h2).value == relate_shapely(h1.points, h2.points)
        checked += 1
    assert checked > 7500


def test_separation():
    assert separation(SQUARE, SQUARE.translated(3, 0)) == pytest.approx(2.0)
    assert separation(SQUARE, SQUARE.translated(1, 0)) == pytest.approx(0.0, abs=1e-12)
    assert separation(SQUARE, SQUARE.translated(0.5, 0)) == pytest.approx(-0.5)
    # aligned overlap without any proper crossing
    a = oriented_rectangle((0, 0), 0.0, 4.0, 2.0)
    b = oriented_rectangle((3, 0), 0.0, 4.0, 2.0)
    assert hulls_relate(a, b) is Relation.DISJOINT
    assert separation(a, b) < 0


def test_oriented_rectangle():
    r = oriented_rectangle((1.0, 2.0), math.pi / 2, 4.0, 2.0)
    assert np.allclose(r.as_array(), [(2.0, 0.0), (2.0, 4.0), (0.0, 4.0), (0.0, 0.0)])
    assert r.area() == pytest.approx(8.0)
    arr = rectangle_corners(np.array([[1.0, 2.0]]), np.array([math.pi / 2]), 4.0, 2.0)[0]
    assert np.allclose(arr, r.as_array())
