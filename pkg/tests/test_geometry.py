import math

import pytest
from hypothesis import given, strategies as st

from grpdconn.errors import EvaluationOutsideDomain
from grpdconn.geometry import (
    Patch,
    Point,
    ProductSpace,
    Space,
    Tangent,
    circle,
    distance,
    line,
    normalize_angle,
    torus_line,
)


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_angle_normalization_idempotent(theta):
    once = normalize_angle(theta)
    assert 0.0 <= once < 2.0 * math.pi
    assert normalize_angle(once) == once


def test_point_normalizes_angles():
    p = Point.make(circle(), 0, (7.0,))
    assert 0.0 <= p.coords[0] < 2.0 * math.pi


def test_excluded_ball_rejects_points():
    space = line(1, excluded=(((0.0,), 1e-3),))
    with pytest.raises(EvaluationOutsideDomain):
        Point.make(space, 0, (5e-4,))
    Point.make(space, 0, (2e-3,))  # outside the ball is fine


def test_distance_wraps_angles():
    s = circle()
    a = Point.make(s, 0, (0.1,))
    b = Point.make(s, 0, (2.0 * math.pi - 0.1,))
    assert distance(a, b) == pytest.approx(0.2, abs=1e-12)


def test_distance_across_patches_is_infinite():
    s = Space((Patch(1, 0, "a"), Patch(1, 0, "b")))
    assert math.isinf(distance(Point.make(s, 0, (0.0,)), Point.make(s, 1, (0.0,))))


def test_product_roundtrip():
    M = torus_line(1, 1)
    prod = ProductSpace(M, M)
    a = Point.make(M, 0, (0.5, 1.0))
    b = Point.make(M, 0, (-0.25, 4.0))
    joined = prod.join(a, b)
    a2, b2 = prod.split(joined)
    assert a2.coords == a.coords and b2.coords == b.coords
    ca, cb = prod.split_coeffs(joined, prod.join_coeffs(joined, (1.0, 2.0), (3.0, 4.0)))
    assert ca == (1.0, 2.0) and cb == (3.0, 4.0)


def test_tangent_dimension_checked():
    p = Point.make(line(2), 0, (0.0, 0.0))
    with pytest.raises(ValueError):
        Tangent(p, (1.0,))
