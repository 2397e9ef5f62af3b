"""Probabilistic radii for the distance between associated trajectories.

Everything is driven by the accumulated proxy ``Psi_t``, kept through the
forward recurrence ``Psi_{t+1} = L_t^2 Psi_t + sigma_t^2`` (``Psi_0 = 0``),
which never forms the running Lipschitz products and so cannot overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

DEFAULT_EPSILON = 1.0 / 16.0


@dataclass(frozen=True)
class DeviationSchedule:
    """``L_0..L_{T-1}``, ``sigma_0^2..sigma_{T-1}^2`` and the derived sequences.

    ``Psi`` has ``T + 1`` entries (``Psi[0] = 0``). ``scaling_worst`` holds
    ``S_t = sqrt(psi_{t-1}) * sum_k sigma_k / sqrt(psi_k)``, the worst-case
    counterpart of ``sqrt(Psi_t)``, kept by ``S_{t+1} = L_t S_t + sigma_t``.
    """

    horizon: int
    lipschitz: np.ndarray
    sigma2: np.ndarray
    Psi: np.ndarray
    scaling_worst: np.ndarray

    @property
    def psi(self):
        """Cumulative products ``psi_t = prod_{k<=t} L_k^2`` (may overflow for long horizons)."""
        return np.cumprod(self.lipschitz ** 2)

    def __len__(self):
        return self.horizon + 1


def build_schedule(lipschitz, sigma2, horizon=None):
    L = np.atleast_1d(np.asarray(lipschitz, dtype=float))
    s2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if horizon is None:
        horizon = min(len(L), len(s2))
    if L.size == 1:
        L = np.full(horizon, L[0])
    if s2.size == 1:
        s2 = np.full(horizon, s2[0])
    if len(L) < horizon or len(s2) < horizon:
        raise ValueError(f"sequences must cover the horizon T={horizon}")
    L = L[:horizon].copy()
    s2 = s2[:horizon].copy()
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(s2))):
        raise ValueError("Lipschitz constants and proxies must be finite")
    if np.any(L < 0) or np.any(s2 < 0):
        raise ValueError("Lipschitz constants and proxies must be non-negative")
    Psi = np.zeros(horizon + 1)
    S = np.zeros(horizon + 1)
    sig = np.sqrt(s2)
    for t in range(horizon):
        Psi[t + 1] = L[t] * L[t] * Psi[t] + s2[t]
        S[t + 1] = L[t] * S[t] + sig[t]
    for arr in (L, s2, Psi, S):
        arr.setflags(write=False)
    return DeviationSchedule(horizon, L, s2, Psi, S)


@dataclass(frozen=True)
class EpsilonConstants:
    epsilon: float
    eps1: float
    eps2: float


def epsilon_constants(epsilon=DEFAULT_EPSILON):
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    d = (1.0 - epsilon) ** 2
    return EpsilonConstants(epsilon, 2.0 * math.log(1.0 + 2.0 / epsilon) / d, 2.0 / d)


def _eps(eps):
    if eps is None:
        return epsilon_constants()
    if isinstance(eps, EpsilonConstants):
        return eps
    return epsilon_constants(eps)


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_t(schedule, t):
    if t < 0 or t > schedule.horizon:
        raise ValueError(f"t={t} outside schedule horizon {schedule.horizon}")


def concentration_coefficient(n, delta, eps=None):
    """``eps1 * n + eps2 * log(1/delta)``."""
    _check_delta(delta)
    e = _eps(eps)
    return e.eps1 * n + e.eps2 * math.log(1.0 / delta)


def amgf_bound(schedule, n, delta, eps=None, t=None):
    """Radius ``sqrt(Psi_t (eps1 n + eps2 log(1/delta)))`` holding w.p. ``1 - delta``."""
    t = schedule.horizon if t is None else t
    _check_t(schedule, t)
    coef = concentration_coefficient(n, delta, eps)
    return math.sqrt(schedule.Psi[t]) * math.sqrt(coef)


def markov_bound(schedule, n, delta, t=None):
    """Radius ``sqrt(n Psi_t / delta)`` from the second-moment bound."""
    t = schedule.horizon if t is None else t
    _check_t(schedule, t)
    _check_delta(delta)
    return math.sqrt(n * schedule.Psi[t] / delta)


def worstcase_bound(schedule, n, delta, eps=None, t=None):
    """Union-bound radius treating each step's noise as bounded at level ``delta/t``."""
    t = schedule.horizon if t is None else t
    _check_t(schedule, t)
    _check_delta(delta)
    if t == 0:
        return 0.0
    e = _eps(eps)
    coef = e.eps1 * n + e.eps2 * math.log(t / delta)
    return schedule.scaling_worst[t] * math.sqrt(coef)


def linear_exact_bound(A_norm, sigma2, n, delta, eps=None, t=1):
    """Radius for ``x+ = A x + B u + w``; identical to :func:`amgf_bound` with ``L = |A|``."""
    s2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    sched = build_schedule(A_norm, s2 if s2.size > 1 else s2[0], horizon=t)
    return amgf_bound(sched, n, delta, eps, t)


def expectation_bound(schedule, n, t=None):
    """Upper bound ``n Psi_t`` on the mean squared deviation."""
    t = schedule.horizon if t is None else t
    _check_t(schedule, t)
    return n * schedule.Psi[t]


def optimize_epsilon(schedule, n, delta, t=None, grid_size=64):
    """Choose epsilon minimising the radius: grid search plus bounded refinement.

    The radius depends on epsilon only through ``eps1 n + eps2 log(1/delta)``;
    the best grid point is refined on the bracket formed by its neighbours.
    """
    if grid_size < 16:
        raise ValueError("grid_size must be at least 16")
    t = schedule.horizon if t is None else t
    _check_t(schedule, t)
    _check_delta(delta)
    grid = np.linspace(0.005, 0.995, grid_size)
    coef = np.array([concentration_coefficient(n, delta, e) for e in grid])
    i = int(np.argmin(coef))
    best_e, best_c = float(grid[i]), float(coef[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid_size - 1)]
    res = minimize_scalar(lambda e: concentration_coefficient(n, delta, e),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if res.success and res.fun < best_c:
        best_e = float(res.x)
    consts = epsilon_constants(best_e)
    return consts, amgf_bound(schedule, n, delta, consts, t)


def bound_table(schedule, n, delta, eps=None):
    """Rows ``(t, Psi, r_amgf, r_markov, r_worstcase)`` for ``t = 0..T``."""
    rows = []
    for t in range(schedule.horizon + 1):
        rows.append((t, schedule.Psi[t], amgf_bound(schedule, n, delta, eps, t),
                     markov_bound(schedule, n, delta, t),
                     worstcase_bound(schedule, n, delta, eps, t)))
    return np.array(rows, dtype=float)
