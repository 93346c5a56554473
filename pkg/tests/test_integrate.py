import math

import pytest

from grpdconn.errors import InvalidHorizon
from grpdconn.geometry import Point, Tangent, line
from grpdconn.integrate import EXCLUDED_POINT, NORM_BLOWUP, integrate

R = line(1)


def _field(fn):
    return lambda t, p: Tangent(p, (fn(t, p.coords[0]),))


def test_zero_field_stays_put():
    out = integrate(_field(lambda t, x: 0.0), Point.make(R, 0, (0.7,)), 1.0)
    assert out.completed
    assert out.end.coords[0] == 0.7


def test_constant_field_translates():
    out = integrate(_field(lambda t, x: 1.0), Point.make(R, 0, (0.0,)), 1.0)
    assert out.completed
    assert abs(out.end.coords[0] - 1.0) < 1e-10


def test_quadratic_blowup_escapes_near_half():
    # x' = x^2, x(0) = 2 blows up at t = 1/2 (x(t) = 2 / (1 - 2t))
    out = integrate(_field(lambda t, x: x * x), Point.make(R, 0, (2.0,)), 1.0)
    assert not out.completed
    assert out.escape_reason in (NORM_BLOWUP, "StepCollapse")
    assert abs(out.escape_time - 0.5) < 0.05


def test_measured_order_is_four():
    # pure fixed-step runs (refinement disabled) on x' = x over [0, 1]
    errors = []
    h = 0.1
    for _ in range(5):
        out = integrate(_field(lambda t, x: x), Point.make(R, 0, (1.0,)), 1.0,
                        h=h, ode_tol=math.inf)
        errors.append(abs(out.end.coords[0] - math.e))
        h /= 2.0
    orders = [math.log2(errors[k] / errors[k + 1]) for k in range(4)]
    mean = sum(orders) / len(orders)
    assert 3.7 <= mean <= 4.3, orders


def test_excluded_point_detected_on_crossing():
    punctured = line(1, excluded=(((0.0,), 1e-3),))
    out = integrate(_field(lambda t, x: 1.0), Point.make(punctured, 0, (-0.5,)), 1.0)
    assert not out.completed
    assert out.escape_reason == EXCLUDED_POINT
    assert abs(out.escape_time - 0.5) < 5e-3


def test_invalid_horizon():
    with pytest.raises(InvalidHorizon):
        integrate(_field(lambda t, x: 0.0), Point.make(R, 0, (0.0,)), 0.0)


def test_completed_reaches_horizon():
    out = integrate(_field(lambda t, x: math.sin(t)), Point.make(R, 0, (0.0,)), 0.7)
    assert out.completed
    assert abs(out.samples[-1][0] - 0.7) < 1e-9
