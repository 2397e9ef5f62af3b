import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochreach import interval as iv
from stochreach.interval import DomainError, Interval

finite = st.floats(-50, 50, allow_nan=False)


def test_square_rule_is_tight():
    assert Interval(-1, 2) ** 2 == Interval(0, 4)


def test_product_of_same_interval_is_wider_than_square():
    x = Interval(-1, 2)
    assert (x * x).lo == -2


def test_sin_on_zero_to_pi():
    out = Interval(0.0, math.pi).sin()
    assert out.hi == 1.0
    assert out.lo <= 0.0 and out.lo > -1e-15


def test_cos_full_period_is_unit():
    assert Interval(0, 7).cos() == Interval(-1, 1)


def test_constant_is_degenerate():
    assert Interval.coerce(2.5) == Interval(2.5, 2.5)


def test_log1p_domain_error():
    with pytest.raises(DomainError):
        Interval(-1.0, 0.5).log1p()


def test_tan_across_pole_raises():
    with pytest.raises(DomainError):
        Interval(1.0, 2.0).tan()


def test_division_by_interval_containing_zero():
    with pytest.raises(DomainError):
        Interval(1, 2) / Interval(-1, 1)


def test_inverted_interval_rejected():
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_dispatch_on_arrays():
    x = np.array([0.0, 1.0])
    np.testing.assert_allclose(iv.log1p(x), np.log1p(x))
    np.testing.assert_allclose(iv.imax(x, 0.5), [0.5, 1.0])


def _nested(a, b, c, d):
    lo, hi = sorted((a, b))
    ilo, ihi = sorted((c, d))
    inner_lo = lo + (hi - lo) * min(ilo, ihi)
    inner_hi = lo + (hi - lo) * max(ilo, ihi)
    return Interval(inner_lo, inner_hi), Interval(lo, hi)


unit = st.floats(0, 1)

UNARY = {
    "exp": lambda x: x.exp(),
    "sin": lambda x: x.sin(),
    "cos": lambda x: x.cos(),
    "atan": lambda x: x.atan(),
    "abs": abs,
    "square": lambda x: x ** 2,
    "cube": lambda x: x ** 3,
    "neg": lambda x: -x,
}


@settings(max_examples=300, deadline=None)
@given(finite, finite, unit, unit, st.sampled_from(sorted(UNARY)))
def test_isotonic_unary(a, b, c, d, name):
    inner, outer = _nested(a, b, c, d)
    if name == "exp":
        inner, outer = _nested(a / 5, b / 5, c, d)
    assert UNARY[name](outer).contains(UNARY[name](inner))


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), unit, unit)
def test_isotonic_positive_domain(a, b, c, d):
    inner, outer = _nested(a, b, c, d)
    for op in (Interval.log1p, Interval.sqrt):
        assert op(outer).contains(op(inner))


@settings(max_examples=300, deadline=None)
@given(finite, finite, unit, unit, finite, finite, unit, unit,
       st.sampled_from(["+", "-", "*", "min", "max"]))
def test_isotonic_binary(a, b, c, d, e, f, g, h, op):
    xi, xo = _nested(a, b, c, d)
    yi, yo = _nested(e, f, g, h)
    fn = {"+": lambda p, q: p + q, "-": lambda p, q: p - q, "*": lambda p, q: p * q,
          "min": iv.imin, "max": iv.imax}[op]
    assert fn(xo, yo).contains(fn(xi, yi))


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(0, 1))
def test_pointwise_enclosure(a, b, s):
    x = Interval(*sorted((a, b)))
    p = x.lo + s * (x.hi - x.lo)
    for name, fn in UNARY.items():
        if name == "exp" and abs(p) > 40:
            continue
        pt = {"exp": math.exp, "sin": math.sin, "cos": math.cos, "atan": math.atan, "abs": abs,
              "square": lambda v: v * v, "cube": lambda v: v ** 3, "neg": lambda v: -v}[name](p)
        assert fn(x).contains(pt)
