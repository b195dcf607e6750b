from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from phasetiles.dyadic import (Interval, dyadic_str, frac, is_dyadic,
                               merge_intervals, parse_dyadic)


def test_interval_basics():
    iv = Interval(Fraction(1, 4), Fraction(3, 4))
    assert iv.length == Fraction(1, 2)
    assert iv.center == Fraction(1, 2)
    assert iv.dilate(2) == Interval(0, 1)
    assert iv.contains(Interval(Fraction(1, 3), Fraction(1, 2)))
    assert not iv.contains(Interval(0, 1))


def test_interval_dist_and_intersections():
    a = Interval(0, 1)
    b = Interval(2, 3)
    assert a.dist(b) == 1
    assert not a.intersects(b)
    assert a.intersects(Interval(1, 2))           # closed touching
    assert not a.intersects_open(Interval(1, 2))  # zero-length overlap


def test_scale_negative_flips():
    iv = Interval(1, 2).scale(-3)
    assert iv == Interval(-6, -3)


def test_merge_intervals_coalesces():
    out = merge_intervals([Interval(0, 1), Interval(1, 2), Interval(3, 4)])
    assert out == [Interval(0, 2), Interval(3, 4)]


dyadics = st.integers(-(1 << 20), 1 << 20).flatmap(
    lambda p: st.integers(0, 24).map(lambda q: Fraction(p, 1 << q)))


@given(dyadics)
def test_dyadic_roundtrip(x):
    assert parse_dyadic(dyadic_str(x)) == x


def test_dyadic_str_rejects_non_dyadic():
    assert not is_dyadic(Fraction(1, 3))
    with pytest.raises(ValueError):
        dyadic_str(Fraction(1, 3))


def test_frac_integral_float():
    assert frac(4.0) == Fraction(4)
    assert frac(Fraction(3, 8)) == Fraction(3, 8)
