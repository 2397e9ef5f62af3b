"""Trajectory ensembles, empirical quantiles and sampled Lipschitz estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drs import BallSet, IntervalBox
from .model import EUCLIDEAN, simulate_batch

CHUNK_SIZE = 50_000


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Stochastic states ``X`` and their associated noiseless states ``x``.

    Both arrays are ``(n_traj, len(times), n)``; ``nominal`` is the noiseless
    trajectory from the nominal initial state at every ``t = 0..T``.
    """

    horizon: int
    times: np.ndarray
    states: np.ndarray
    associated: np.ndarray
    nominal: np.ndarray
    seed: int

    @property
    def n_traj(self):
        return self.states.shape[0]

    def _slot(self, t):
        k = np.searchsorted(self.times, t)
        if k >= len(self.times) or self.times[k] != t:
            raise KeyError(f"time {t} was not recorded")
        return int(k)

    def states_at(self, t):
        return self.states[:, self._slot(t)]

    def deviations(self, t, norm=EUCLIDEAN):
        """``|X_t - x_t|`` for every trajectory."""
        k = self._slot(t)
        return norm(self.states[:, k] - self.associated[:, k])


def _initial_states(initial, n_traj, rng):
    if isinstance(initial, IntervalBox):
        return initial.sample(rng, n_traj)
    x0 = np.asarray(initial, dtype=float).ravel()
    return np.broadcast_to(x0, (n_traj, x0.size)).copy()


def run_ensemble(model, noise, initial, horizon, n_traj, seed=0, inputs=None, record=None,
                 nominal_x0=None, chunk_size=CHUNK_SIZE):
    """Simulate ``n_traj`` trajectory pairs.

    ``initial`` is a point or an IntervalBox sampled uniformly. Trajectories
    are simulated in fixed-size chunks, chunk ``k`` drawing from the stream
    ``SeedSequence([seed, k])``, so results do not depend on how chunks are
    scheduled.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    times = np.arange(horizon + 1) if record is None else np.asarray(sorted(set(record)), dtype=int)
    Xs, xs = [], []
    for k, start in enumerate(range(0, n_traj, chunk_size)):
        m = min(chunk_size, n_traj - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        x0 = _initial_states(initial, m, rng)
        X, x = simulate_batch(model, noise, x0, horizon, rng, inputs=inputs, record=times,
                              index_offset=start)
        Xs.append(X)
        xs.append(x)
    if nominal_x0 is None:
        nominal_x0 = initial.center if isinstance(initial, IntervalBox) else initial
    nominal = nominal_trajectory(model, nominal_x0, horizon, inputs)
    return TrajectoryEnsemble(horizon, times, np.concatenate(Xs), np.concatenate(xs), nominal, seed)


def nominal_trajectory(model, x0, horizon, inputs=None):
    """Noiseless trajectory ``(T+1, n)`` from ``x0``."""
    x = np.asarray(x0, dtype=float).reshape(1, -1)
    out = np.empty((horizon + 1, x.shape[1]))
    out[0] = x[0]
    for t in range(horizon):
        if model.dim_input == 0:
            u = np.zeros((1, 0))
        elif inputs is None:
            u = np.zeros((1, model.dim_input))
        elif callable(inputs):
            u = np.asarray(inputs(t), dtype=float).reshape(1, -1)
        else:
            u = np.asarray(inputs, dtype=float)[t].reshape(1, -1)
        x = model.step(x, u, t)
        out[t + 1] = x[0]
    return out


def empirical_quantile_radius(deviations, delta):
    """The ``ceil(delta N)``-th largest deviation (the empirical ``1 - delta`` quantile)."""
    d = np.asarray(deviations, dtype=float).ravel()
    N = d.size
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    # guard against delta*N landing a hair above an integer
    k = math.ceil(delta * N - 1e-9 * max(1.0, delta * N))
    if delta * N < 1.0 - 1e-9:
        raise ValueError(f"{N} samples cannot resolve delta={delta}; need at least {math.ceil(1 / delta)}")
    return float(np.partition(d, N - k)[N - k])


def _sample_region(region, rng, size):
    if isinstance(region, IntervalBox):
        return region.sample(rng, size)
    if isinstance(region, BallSet):
        n = region.dim
        g = rng.standard_normal((size, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        z = g * (region.radius * rng.uniform(size=(size, 1)) ** (1.0 / n))
        return region.center + region.norm.from_frame(z)
    raise TypeError(f"unsupported region {type(region).__name__}")


def _region_scale(region):
    if isinstance(region, IntervalBox):
        return float(np.max(region.width))
    return region.radius


def estimate_local_lipschitz(model, region, n_pairs=1000, t=0, inflation=1.1, norm=None,
                             seed=0, inputs=None):
    """Largest sampled ratio ``|f(x,u,t) - f(y,u,t)| / |x - y|`` over pairs in ``region``, times ``inflation``.

    Half of the pairs are drawn independently over the region; the other
    half are close pairs that probe the local Jacobian. This is a
    statistical estimate, not a certified bound.
    """
    if n_pairs < 1000:
        raise ValueError("use at least 10^3 pairs")
    if not _region_scale(region) > 0:
        raise ValueError("region has zero diameter")
    if norm is None:
        norm = region.norm if isinstance(region, BallSet) else EUCLIDEAN
    rng = np.random.default_rng(seed)
    x = _sample_region(region, rng, n_pairs)
    half = n_pairs // 2
    y = _sample_region(region, rng, n_pairs)
    step = 1e-4 * _region_scale(region)
    y[half:] = x[half:] + norm.from_frame(step * rng.standard_normal((n_pairs - half, region.dim)))
    if inputs is not None:
        u = np.broadcast_to(np.asarray(inputs, dtype=float), (n_pairs, model.dim_input))
    elif model.input_set is not None:
        u = model.input_set.sample(rng, n_pairs)
    else:
        u = np.zeros((n_pairs, model.dim_input))
    num = norm(model.step(x, u, t) - model.step(y, u, t))
    den = norm(x - y)
    ok = den > 0
    return inflation * float(np.max(num[ok] / den[ok]))


@dataclass(frozen=True)
class UavGains:
    """Saturated straight-line guidance: course from a vector field, roll and flight-path angle from proportional loops."""

    k_chi: float = 1.5
    k_path: float = 0.02
    chi_inf: float = math.pi / 4
    k_h: float = 0.05
    phi_max: float = math.radians(30.0)
    gamma_max: float = math.radians(15.0)


def wrap_angle(a):
    return (np.asarray(a) + math.pi) % (2.0 * math.pi) - math.pi


def line_errors(state, origin, direction):
    """Signed cross-track error and altitude error (line minus aircraft) to a horizontal line."""
    state = np.asarray(state, dtype=float)
    chi_q = math.atan2(direction[1], direction[0])
    dx = state[..., 0] - origin[0]
    dy = state[..., 1] - origin[1]
    e_py = -math.sin(chi_q) * dx + math.cos(chi_q) * dy
    e_h = origin[2] - state[..., 2]
    return e_py, e_h


def uav_controller(state, origin=(0.0, 0.0, 3.0), direction=(1.0, 1.0, 0.0), gains=UavGains()):
    """Flight-path angle ``gamma`` and roll ``phi`` steering toward the line ``origin + a*direction``."""
    state = np.asarray(state, dtype=float)
    chi_q = math.atan2(direction[1], direction[0])
    e_py, e_h = line_errors(state, origin, direction)
    chi_c = chi_q - gains.chi_inf * (2.0 / math.pi) * np.arctan(gains.k_path * e_py)
    phi = np.clip(gains.k_chi * wrap_angle(chi_c - state[..., 3]), -gains.phi_max, gains.phi_max)
    gamma = np.clip(gains.k_h * e_h, -gains.gamma_max, gains.gamma_max)
    return gamma, phi
