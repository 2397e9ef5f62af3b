"""Named experiment configurations and loading of custom systems from JSON."""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .drs import BallSet, IntervalBox
from .model import (EUCLIDEAN, InputBox, NoiseSpec, NormSpec, SystemModel,
                    certify_variance_proxy)
from .montecarlo import UavGains, estimate_local_lipschitz, nominal_trajectory, uav_controller

PRESET_NAMES = ("linear", "cobweb", "uav")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    model: SystemModel
    noise: NoiseSpec
    initial: object  # point or IntervalBox
    nominal_x0: np.ndarray
    horizon: int
    delta: float
    epsilon: float
    n_traj: int
    norm: NormSpec = EUCLIDEAN
    r1: float = 0.0
    r2: float = 0.0
    rho: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.model.dim_state

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@functools.lru_cache(maxsize=1)
def _preset_text():
    return resources.files("stochreach").joinpath("data/presets.json").read_text()


def preset_parameters(name=None):
    """Raw parameter tables (a fresh copy on each call)."""
    data = json.loads(_preset_text())
    if name is None:
        return data
    if name not in data:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return data[name]


def linear_preset(dim=None, **overrides):
    p = preset_parameters("linear")
    n = int(dim or p["dim"])
    a = p["a"]
    exprs = [f"{a!r}*x{i}" for i in range(n)]
    model = SystemModel.from_expressions(exprs, n, lipschitz=abs(a), name="linear")
    noise = NoiseSpec("gaussian", n, scale=math.sqrt(p["noise_variance"]))
    x0 = np.zeros(n) if dim else np.asarray(p["x0"], dtype=float)
    pre = ExperimentPreset("linear", model, noise, x0, x0, p["horizon"], p["delta"],
                           p["epsilon"], p["n_traj"], params=p)
    return pre.with_overrides(**overrides)


def cobweb_model(a, b, c, d):
    exprs = ["a - b*log1p(x1)", "(c*a - d) - c*b*log1p(x1)"]
    return SystemModel.from_expressions(exprs, 2, params={"a": a, "b": b, "c": c, "d": d},
                                        name="cobweb")


def cobweb_lipschitz(b, c, q_min):
    """``b sqrt(1 + c^2) / (1 + q_min)``, the Euclidean Lipschitz constant for ``q >= q_min``."""
    if q_min <= -1.0:
        raise ValueError(f"region reaches q={q_min}, where the Lipschitz constant is unbounded")
    return b * math.sqrt(1.0 + c * c) / (1.0 + q_min)


def cobweb_preset(**overrides):
    p = preset_parameters("cobweb")
    model = cobweb_model(p["a"], p["b"], p["c"], p["d"])
    frac = p["cap_fraction"]
    noise = NoiseSpec("truncated_gaussian", 2, scale=math.sqrt(p["noise_variance"]),
                      mixing=[[1.0, 0.0], [p["c"], 1.0]], cap=lambda cand, t: frac * cand)
    box = IntervalBox(p["x0_lower"], p["x0_upper"])
    pre = ExperimentPreset("cobweb", model, noise, box, np.asarray(p["x0_nominal"], dtype=float),
                           p["horizon"], p["delta"], p["epsilon"], p["n_traj"],
                           r1=p["r1"], r2=p["r2"], params=p)
    return pre.with_overrides(**overrides)


def certified_proxy_along(preset, nominal, n_samples=100_000, seed=0):
    """Largest certified proxy over the pre-noise candidates ``f(x*_t)``, ``t < T``."""
    best = 0.0
    for t in range(preset.horizon):
        cand = preset.model.step(nominal[t][None], None, t)[0]
        s = certify_variance_proxy(preset.noise, preset.norm, n_samples=n_samples, seed=seed + t,
                                   t=t, candidate=cand)
        best = max(best, s)
    return best


def uav_model(v, g, eta, origin, direction, gains, wind_limit=0.0):
    def step(x, u=None, t=0):
        x = np.asarray(x, dtype=float)
        gamma, phi = uav_controller(x, origin, direction, gains)
        th = x[..., 3]
        rate = np.stack([v * np.cos(th) * np.cos(gamma), v * np.sin(th) * np.cos(gamma),
                         v * np.sin(gamma), (g / v) * np.tan(phi)], axis=-1)
        if u is not None and np.size(u):
            rate[..., :3] += u
        return x + eta * rate

    inputs = InputBox([-wind_limit] * 3, [wind_limit] * 3) if wind_limit > 0 else None
    return SystemModel(4, step, dim_input=3, input_set=inputs, name="uav",
                       params={"v": v, "g": g, "eta": eta})


def uav_preset(**overrides):
    p = preset_parameters("uav")
    gains = UavGains(**p["gains"])
    wind = p["wind_limit"] if p["wind"] else 0.0
    model = uav_model(p["v"], p["g"], p["eta"], tuple(p["line_origin"]),
                      tuple(p["line_direction"]), gains, wind)
    scale = math.sqrt(p["eta"]) * p["noise_scale"] * np.sqrt(p["noise_variances"])
    noise = NoiseSpec("gaussian", 4, scale=scale)
    norm = NormSpec(np.diag(p["weights"]))
    # wind enters the three position rates through eta
    rho = p["eta"] * float(np.linalg.norm(norm.transform[:, :3], 2))
    r2 = wind * math.sqrt(3.0)
    x0 = np.asarray(p["x0"], dtype=float)
    pre = ExperimentPreset("uav", model, noise, x0, x0, p["horizon"], p["delta"], p["epsilon"],
                           p["n_traj"], norm=norm, r2=r2, rho=rho, params=p)
    return pre.with_overrides(**overrides)


def uav_lipschitz_fn(preset, inflation=None, n_pairs=None, seed=0, floor=1e-6):
    """Sampled localized constants for the UAV closed loop in the weighted norm."""
    p = preset.params
    inflation = p["lipschitz_inflation"] if inflation is None else inflation
    n_pairs = p["lipschitz_pairs"] if n_pairs is None else n_pairs

    def fn(t, center, radius):
        # a point region has no diameter; probe a tiny ball instead
        region = BallSet(center, max(radius, floor), preset.norm)
        return estimate_local_lipschitz(preset.model, region, n_pairs, t, inflation,
                                        seed=seed + t)

    return fn


def get_preset(name, **overrides):
    builders = {"linear": linear_preset, "cobweb": cobweb_preset, "uav": uav_preset}
    if name not in builders:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return builders[name](**overrides)


def system_from_json(spec):
    """Build a preset from a JSON file path or an already-parsed dict.

    Required keys: ``dim_state``, ``expressions`` and ``lipschitz``; a
    ``noise`` block (``kind`` gaussian or uniform_box, ``scale``, optional
    ``mixing``); and an initial condition as ``x0`` or ``x0_lower``/``x0_upper``.
    """
    if isinstance(spec, (str, Path)):
        try:
            spec = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read system spec {spec}: {exc}") from None
    try:
        n = int(spec["dim_state"])
        p = int(spec.get("dim_input", 0))
        model = SystemModel.from_expressions(
            spec["expressions"], n, p, spec.get("params"), lipschitz=spec["lipschitz"],
            name=spec.get("name", "custom"),
            input_set=InputBox(*spec["input_box"]) if "input_box" in spec else None)
        nz = spec["noise"]
        if nz["kind"] not in ("gaussian", "uniform_box"):
            raise ConfigError("JSON systems support gaussian and uniform_box noise")
        noise = NoiseSpec(nz["kind"], n, scale=nz["scale"], mixing=nz.get("mixing"))
        norm = NormSpec(np.diag(spec["weights"])) if "weights" in spec else EUCLIDEAN
        if "x0_lower" in spec:
            initial = IntervalBox(spec["x0_lower"], spec["x0_upper"])
            x0 = initial.center
            r1 = initial.bounding_radius(norm)
        else:
            x0 = initial = np.asarray(spec["x0"], dtype=float)
            r1 = 0.0
    except KeyError as exc:
        raise ConfigError(f"system spec is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid system spec: {exc}") from None
    if len(x0) != n:
        raise ConfigError("initial state dimension does not match dim_state")
    return ExperimentPreset(model.name, model, noise, initial, np.asarray(x0, dtype=float),
                            int(spec.get("horizon", 10)), float(spec.get("delta", 1e-3)),
                            float(spec.get("epsilon", 1 / 16)), int(spec.get("n_traj", 1000)),
                            norm=norm, r1=r1, r2=float(spec.get("r2", 0.0)),
                            rho=float(spec.get("rho", 0.0)), params=dict(spec))


def nominal_for(preset, inputs=None):
    return nominal_trajectory(preset.model, preset.nominal_x0, preset.horizon, inputs)
