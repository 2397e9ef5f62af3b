import json
import math
from pathlib import Path

import numpy as np
import pytest

from stochreach.drs import IntervalBox
from stochreach.presets import (ConfigError, cobweb_lipschitz, get_preset, preset_parameters,
                                system_from_json)

REF = json.loads((Path(__file__).parent / "fixtures" / "reference_parameters.json").read_text())


def test_linear_preset_matches_reference():
    ref = REF["linear"]
    pre = get_preset("linear")
    x = np.array([[1.0, -2.0], [0.5, 3.0]])
    np.testing.assert_allclose(pre.model.step(x, None, 0), x @ np.array(ref["A"]).T, rtol=1e-15)
    assert pre.model.lipschitz_at(0) == ref["lipschitz"]
    cov = np.diag(pre.noise.scale ** 2) if np.ndim(pre.noise.scale) else pre.noise.scale ** 2 * np.eye(2)
    np.testing.assert_allclose(cov, ref["noise_covariance"], rtol=1e-15)
    assert pre.noise.closed_form_sigma() == pytest.approx(ref["sigma"], rel=1e-15)
    np.testing.assert_array_equal(pre.initial, ref["x0"])
    assert (pre.n_traj, pre.horizon, pre.delta, pre.epsilon) == (
        ref["n_traj"], ref["horizon"], ref["delta"], ref["epsilon"])
    assert preset_parameters("linear")["scaling"]["t"] == ref["scaling_t"]


def test_linear_preset_in_higher_dimension():
    pre = get_preset("linear", dim=8)
    assert pre.dim == 8 and pre.noise.dim == 8
    assert pre.model.step(np.ones((1, 8)), None, 0).shape == (1, 8)


def test_cobweb_preset_matches_reference():
    ref = REF["cobweb"]
    pre = get_preset("cobweb")
    p = pre.params
    assert (p["a"], p["b"], p["c"], p["d"]) == (ref["a"], ref["b"], ref["c"], ref["d"])
    assert isinstance(pre.initial, IntervalBox)
    np.testing.assert_array_equal(pre.initial.lower, [r[0] for r in ref["x0_box"]])
    np.testing.assert_array_equal(pre.initial.upper, [r[1] for r in ref["x0_box"]])
    np.testing.assert_array_equal(pre.nominal_x0, ref["x0_nominal"])
    assert pre.r1 == pytest.approx(ref["r1"], rel=1e-15) and pre.r2 == 0.0
    assert pre.noise.scale == pytest.approx(math.sqrt(ref["noise_variance"]))
    assert p["cap_fraction"] == ref["cap_fraction"]
    assert (pre.n_traj, pre.horizon, pre.delta, pre.epsilon) == (
        ref["n_traj"], ref["horizon"], ref["delta"], ref["epsilon"])
    assert p["plot_times"] == ref["plot_times"]
    # the dynamics p+ = a - b log(1+q), q+ = c p+ - d
    x = np.array([[9.2, 3.6]])
    nxt = pre.model.step(x, None, 0)[0]
    assert nxt[0] == pytest.approx(10 - 1.5 * math.log(4.6), rel=1e-15)
    assert nxt[1] == pytest.approx(0.5 * nxt[0] - 1, rel=1e-14)


def test_cobweb_initial_box_is_inside_r1_ball():
    pre = get_preset("cobweb")
    assert pre.initial.bounding_radius() == pytest.approx(pre.r1, rel=1e-12)


def test_cobweb_lipschitz_formula():
    assert cobweb_lipschitz(1.5, 0.5, 3.5) == pytest.approx(1.5 * math.sqrt(1.25) / 4.5)
    with pytest.raises(ValueError):
        cobweb_lipschitz(1.5, 0.5, -1.0)


def test_uav_preset_matches_reference():
    ref = REF["uav"]
    pre = get_preset("uav")
    p = pre.params
    assert (p["v"], p["g"], p["eta"]) == (ref["v"], ref["g"], ref["eta"])
    np.testing.assert_allclose(pre.noise.scale,
                               ref["noise_prefactor"] * np.sqrt(ref["noise_covariance_diag"]),
                               rtol=1e-15)
    assert p["wind_limit"] == ref["wind_limit"]
    np.testing.assert_allclose(pre.initial, ref["x0"], rtol=1e-15)
    assert p["line_origin"] == ref["line_origin"] and p["line_direction"] == ref["line_direction"]
    np.testing.assert_array_equal(np.diag(pre.norm.weight_matrix), ref["weights"])
    assert (pre.n_traj, pre.horizon, pre.delta, pre.epsilon) == (
        ref["n_traj"], ref["horizon"], ref["delta"], ref["epsilon"])


def test_uav_dynamics_single_step():
    pre = get_preset("uav")
    x = np.array([[0.0, 0.0, 3.0, math.pi / 4]])
    nxt = pre.model.step(x, np.zeros((1, 3)), 0)[0]
    # on the line and aligned with it: straight flight at 13 m/s
    np.testing.assert_allclose(nxt, [1.3 / math.sqrt(2), 1.3 / math.sqrt(2), 3.0, math.pi / 4],
                               atol=1e-12)


def test_uav_wind_option_sets_input_term():
    pre = get_preset("uav")
    assert pre.r2 == 0.0 and pre.model.input_set is None


def test_overrides_skip_none():
    pre = get_preset("linear", delta=None, n_traj=7)
    assert pre.delta == 1e-3 and pre.n_traj == 7


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset("pendulum")
    with pytest.raises(ConfigError):
        preset_parameters("pendulum")


SPEC = {
    "dim_state": 2,
    "expressions": ["0.5*x0 + 0.1*sin(x1)", "0.6*x1"],
    "lipschitz": 0.7,
    "noise": {"kind": "gaussian", "scale": 0.1},
    "x0_lower": [-0.1, -0.1],
    "x0_upper": [0.1, 0.1],
    "horizon": 4,
}


def test_system_from_json_dict_and_file(tmp_path):
    pre = system_from_json(SPEC)
    assert pre.dim == 2 and pre.horizon == 4 and pre.delta == 1e-3 and pre.epsilon == 1 / 16
    assert pre.r1 == pytest.approx(math.sqrt(0.02))
    f = tmp_path / "sys.json"
    f.write_text(json.dumps(SPEC))
    again = system_from_json(f)
    np.testing.assert_array_equal(again.initial.lower, pre.initial.lower)


@pytest.mark.parametrize("mutate", [
    lambda s: s.pop("lipschitz"),
    lambda s: s["noise"].update(kind="laplace"),
    lambda s: s.update(expressions=["__import__('os')", "x1"]),
    lambda s: s.update(x0_lower=[0.0], x0_upper=[1.0]),
    lambda s: s.update(x0_lower=[1.0, 1.0], x0_upper=[0.0, 0.0]),
])
def test_system_from_json_rejects_bad_specs(mutate):
    spec = json.loads(json.dumps(SPEC))
    mutate(spec)
    with pytest.raises(ConfigError):
        system_from_json(spec)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        system_from_json(tmp_path / "nope.json")
