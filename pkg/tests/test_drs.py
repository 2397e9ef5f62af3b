import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochreach.drs import (BallSet, InclusionError, IntervalBox, interval_reach, interval_step,
                            lipschitz_drs, lipschitz_radii, lipschitz_radius, natural_inclusion)
from stochreach.interval import DomainError, Interval
from stochreach.model import SystemModel
from stochreach.montecarlo import nominal_trajectory
from stochreach.presets import cobweb_lipschitz, cobweb_model


def _scalar_model(expr, dim_input=0):
    return SystemModel.from_expressions([expr], 1, dim_input)


def test_radius_at_time_zero_is_r1():
    assert lipschitz_radius(0.7, 2.0, 0.3, 5.0, 0) == 0.3
    assert lipschitz_radius(1.0, 2.0, 0.3, 5.0, 0) == 0.3


def test_radius_without_inputs():
    assert lipschitz_radius(0.9, 0.0, 0.1, 0.0, 2) == pytest.approx(0.081, rel=1e-14)


def test_cobweb_radius_is_geometric_in_r1():
    r1 = 5 * math.sqrt(2) * 1e-3
    L = cobweb_lipschitz(1.5, 0.5, 3.5)
    for t in range(6):
        assert lipschitz_radius(L, 1.0, r1, 0.0, t) == pytest.approx(L ** t * r1, rel=1e-14)


def test_unit_gain_limit_is_continuous():
    at_one = lipschitz_radius(1.0, 0.5, 0.2, 0.3, 7)
    assert at_one == pytest.approx(0.2 + 0.5 * 0.3 * 7)
    near = lipschitz_radius(1.0 + 1e-9, 0.5, 0.2, 0.3, 7)
    assert near == pytest.approx(at_one, rel=1e-6)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        lipschitz_radius(0.5, 1.0, 0.1, 0.1, -1)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.8), st.floats(0.0, 3.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0),
       st.integers(1, 40))
def test_recurrence_matches_closed_form(L, rho, r1, r2, T):
    R = lipschitz_radii(L, rho, r1, r2, T)
    for t in range(T + 1):
        closed = lipschitz_radius(L, rho, r1, r2, t)
        assert abs(R[t] - closed) <= 1e-10 * max(1.0, closed)


def test_lipschitz_drs_is_centred_on_nominal():
    nominal = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 4.0]])
    ball = lipschitz_drs(nominal, 0.5, 0.0, 1.0, 0.0, 2)
    np.testing.assert_array_equal(ball.center, [3.0, 4.0])
    assert ball.radius == 0.25
    with pytest.raises(ValueError):
        BallSet([0.0], -1.0)


def test_identity_step_keeps_box():
    inc = natural_inclusion(SystemModel.from_expressions(["x0", "x1"], 2))
    box = IntervalBox([0.0, -1.0], [1.0, 2.0])
    out = interval_step(inc, box, None, 0)
    np.testing.assert_array_equal(out.lower, box.lower)
    np.testing.assert_array_equal(out.upper, box.upper)


def test_doubling_step():
    out = interval_step(natural_inclusion(_scalar_model("2*x0")), IntervalBox([1.0], [2.0]), None, 0)
    assert (out.lower[0], out.upper[0]) == (2.0, 4.0)


def test_cobweb_endpoints_swap():
    a, b, c, d = 10.0, 1.5, 0.5, 1.0
    inc = natural_inclusion(cobweb_model(a, b, c, d))
    out = interval_step(inc, IntervalBox([9.0, 3.595], [9.0, 3.605]), None, 0)
    p_hi = a - b * math.log1p(3.595)
    p_lo = a - b * math.log1p(3.605)
    assert out.lower[0] <= p_lo and out.upper[0] >= p_hi
    assert out.lower[0] == pytest.approx(p_lo, rel=1e-14)
    assert out.upper[0] == pytest.approx(p_hi, rel=1e-14)
    q_lo = c * a - d - c * b * math.log1p(3.605)
    assert out.lower[1] == pytest.approx(q_lo, rel=1e-14)


def test_inverted_inclusion_is_an_internal_error():
    def bad(box, input_box, t):
        return box.upper + 1.0, box.lower
    with pytest.raises(InclusionError):
        interval_step(bad, IntervalBox([0.0], [1.0]), None, 3)


def test_domain_error_carries_step():
    inc = natural_inclusion(_scalar_model("log1p(x0) - 3"))
    with pytest.raises(DomainError) as info:
        interval_reach(inc, IntervalBox([0.5], [1.0]), None, 5)
    assert info.value.step == 1


def test_natural_inclusion_requires_expressions():
    model = SystemModel(dim_state=1, step=lambda x, u=None, t=0: x)
    with pytest.raises(ValueError):
        natural_inclusion(model)


def test_square_and_sine_rules_through_inclusion():
    out = interval_step(natural_inclusion(_scalar_model("x0**2")), IntervalBox([-1.0], [2.0]), None, 0)
    assert (out.lower[0], out.upper[0]) == (0.0, 4.0)
    out = interval_step(natural_inclusion(_scalar_model("sin(x0)")), IntervalBox([0.0], [math.pi]), None, 0)
    assert out.upper[0] == 1.0 and -1e-15 < out.lower[0] <= 0.0
    out = interval_step(natural_inclusion(_scalar_model("2.5")), IntervalBox([-1.0], [1.0]), None, 0)
    assert (out.lower[0], out.upper[0]) == (2.5, 2.5)


def test_zero_width_identity_stays_zero_width():
    inc = natural_inclusion(_scalar_model("x0"))
    boxes = interval_reach(inc, IntervalBox.point([0.3]), None, 10)
    assert len(boxes) == 11
    assert all(b.width[0] == 0.0 for b in boxes)


def test_contraction_halves_width():
    inc = natural_inclusion(_scalar_model("0.5*x0"))
    boxes = interval_reach(inc, IntervalBox([-1.0], [1.0]), None, 8)
    for t, b in enumerate(boxes):
        assert b.width[0] == 2.0 * 0.5 ** t


def test_interval_soundness_with_inputs():
    model = SystemModel.from_expressions(["0.9*x0 - 0.2*sin(x1) + u0", "0.3*x0 + 0.7*cos(x1)"], 2, 1)
    x0_box = IntervalBox([-0.5, 0.0], [0.5, 1.0])
    u_box = IntervalBox([-0.1], [0.1])
    boxes = interval_reach(natural_inclusion(model), x0_box, u_box, 12)
    rng = np.random.default_rng(0)
    x = x0_box.sample(rng, 1000)
    for t in range(12):
        assert np.all(boxes[t].contains(x))
        x = model.step(x, rng.uniform(-0.1, 0.1, size=(1000, 1)), t)
    assert np.all(boxes[12].contains(x))


def test_lipschitz_soundness_on_cobweb():
    a, b, c, d = 10.0, 1.5, 0.5, 1.0
    model = cobweb_model(a, b, c, d)
    x_star = np.array([9.2, 3.6])
    r1 = 5 * math.sqrt(2) * 1e-3
    T = 5
    nominal = nominal_trajectory(model, x_star, T)
    R = [r1]
    for t in range(T):
        R.append(cobweb_lipschitz(b, c, nominal[t, 1] - R[-1]) * R[-1])
    rng = np.random.default_rng(1)
    ang = rng.uniform(0, 2 * np.pi, 1000)
    rad = r1 * np.sqrt(rng.uniform(0, 1, 1000))
    x = x_star + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    for t in range(T + 1):
        assert np.all(np.linalg.norm(x - nominal[t], axis=1) <= R[t] * (1 + 1e-12))
        x = model.step(x, None, t)


def test_lipschitz_soundness_with_bounded_inputs():
    model = SystemModel.from_expressions(["0.5*x0 + 0.2*sin(x1) + u0", "0.5*x1 + u1"], 2, 2)
    # |D_x f|_2 <= 0.5 + 0.2, |D_u f|_2 = 1
    L, rho, r1, r2, T = 0.7, 1.0, 0.2, 0.05, 15
    nominal = nominal_trajectory(model, np.zeros(2), T)
    rng = np.random.default_rng(2)
    ang = rng.uniform(0, 2 * np.pi, 1000)
    x = r1 * np.sqrt(rng.uniform(size=(1000, 1))) * np.column_stack([np.cos(ang), np.sin(ang)])
    for t in range(T + 1):
        dev = np.linalg.norm(x - nominal[t], axis=1)
        assert np.all(dev <= lipschitz_radius(L, rho, r1, r2, t) + 1e-12)
        u = rng.normal(size=(1000, 2))
        u *= r2 * rng.uniform(size=(1000, 1)) / np.linalg.norm(u, axis=1, keepdims=True)
        x = model.step(x, u, t)


def test_box_helpers():
    box = IntervalBox([0.0, 0.0], [2.0, 4.0])
    np.testing.assert_array_equal(box.center, [1.0, 2.0])
    assert box.bounding_radius() == pytest.approx(math.sqrt(5))
    assert IntervalBox.from_intervals([Interval(0, 1)]).dim == 1
    with pytest.raises(ValueError):
        IntervalBox([1.0], [0.0])
