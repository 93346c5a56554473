import math

import pytest
from hypothesis import given, strategies as st

from grpdconn.intervals import Interval, fmt_bound, hull_of

finite = st.floats(min_value=-1e8, max_value=1e8, allow_nan=False)


@st.composite
def intervals(draw):
    a = draw(finite)
    b = draw(finite)
    return Interval.of(min(a, b), max(a, b))


@given(intervals(), intervals(), st.floats(min_value=0, max_value=1),
       st.floats(min_value=0, max_value=1))
def test_arithmetic_soundness(i1, i2, s, t):
    x = i1.lo + s * (i1.hi - i1.lo)
    y = i2.lo + t * (i2.hi - i2.lo)
    assert (i1 + i2).contains(x + y)
    assert (i1 - i2).contains(x - y)
    assert (i1 * i2).contains(x * y)
    assert i1.sq().contains(x * x)
    assert i1.abs().contains(abs(x))


@given(intervals(), st.floats(min_value=0, max_value=1))
def test_trig_soundness(iv, s):
    x = iv.lo + s * (iv.hi - iv.lo)
    assert iv.sin().contains(math.sin(x))
    assert iv.cos().contains(math.cos(x))
    assert -1.0 <= iv.sin().lo and iv.sin().hi <= 1.0


def test_sqrt_and_division():
    iv = Interval.of(4.0, 9.0)
    s = iv.sqrt()
    assert s.contains(2.0) and s.contains(3.0)
    q = Interval.of(1.0, 2.0) / Interval.of(2.0, 4.0)
    assert q.contains(0.5) and q.contains(0.25)
    with pytest.raises(ZeroDivisionError):
        Interval.of(1.0, 2.0) / Interval.of(-1.0, 1.0)


def test_trig_hits_extrema():
    iv = Interval.of(0.0, 4.0)  # contains pi/2
    assert iv.sin().hi == 1.0
    iv2 = Interval.of(2.0, 5.0)  # contains pi
    assert iv2.cos().lo == -1.0


def test_outward_rounding_strict():
    a = Interval.point(0.1)
    b = Interval.point(0.2)
    c = a + b
    assert c.lo < 0.1 + 0.2 < c.hi or c.contains(0.30000000000000004)
    assert c.width > 0.0


def test_intersections_and_hull():
    assert Interval.of(0, 1).intersects(Interval.of(1, 2))
    assert not Interval.of(0, 1).intersects(Interval.of(1.5, 2))
    h = hull_of([Interval.of(0, 1), Interval.of(3, 4)])
    assert h.lo == 0 and h.hi == 4


def test_fmt_bound_records_direction():
    d = fmt_bound(Interval.of(1.0, 2.0))
    assert d["rounding"] == "outward"
    assert d["lo"] == "1" and d["hi"] == "2"
