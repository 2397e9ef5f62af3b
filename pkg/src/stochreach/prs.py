"""Probabilistic reachable sets: a DRS over-approximation inflated by a deviation ball.

The Minkowski sum is never built as geometry. Membership is decided by the
distance from a point to the base set, measured in the frame where the
inflation ball is Euclidean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, lsq_linear

from .deviation import amgf_bound, build_schedule, concentration_coefficient
from .drs import BallSet, IntervalBox
from .model import EUCLIDEAN, NormSpec


@dataclass(frozen=True)
class ProbabilisticReachSet:
    base: object
    inflation: float
    delta: float
    t: int
    norm: NormSpec = EUCLIDEAN

    def __post_init__(self):
        if not self.inflation >= 0:
            raise ValueError("inflation must be non-negative")

    @property
    def dim(self):
        return self.base.dim

    def contains(self, x):
        return membership(self, x).inside


@dataclass(frozen=True)
class Membership:
    inside: np.ndarray
    dist: np.ndarray
    margin: np.ndarray


def make_prs(base, schedule, n, delta, eps=None, t=None, norm=None):
    t = schedule.horizon if t is None else t
    if norm is None:
        norm = base.norm if isinstance(base, BallSet) else EUCLIDEAN
    return ProbabilisticReachSet(base, amgf_bound(schedule, n, delta, eps, t), delta, t, norm)


def _box_distance(x, box, norm):
    resid = x - np.clip(x, box.lower, box.upper)
    if norm.is_diagonal:
        return norm(resid)
    # non-diagonal weights: bounded least squares per point
    T = norm.transform
    out = np.empty(x.shape[0])
    for i, xi in enumerate(x):
        if not np.any(resid[i]):
            out[i] = 0.0
            continue
        res = lsq_linear(T, T @ xi, bounds=(box.lower, box.upper), tol=1e-14)
        out[i] = np.linalg.norm(T @ (xi - res.x))
    return out


def _ellipsoid_distance(z, c, Q, R):
    """Euclidean distance from ``z`` to ``{y : (y-c)' Q (y-c) <= R^2}``."""
    q, V = np.linalg.eigh(Q)
    out = np.empty(z.shape[0])
    for i, zi in enumerate(z):
        d = V.T @ (zi - c)
        if d @ (q * d) <= R * R:
            out[i] = 0.0
            continue
        if R == 0.0:
            out[i] = np.linalg.norm(d)
            continue

        def excess(mu):
            return float(np.sum(q * (d / (1.0 + mu * q)) ** 2)) - R * R

        hi = 1.0
        while excess(hi) > 0:
            hi *= 2.0
        mu = brentq(excess, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        y = d / (1.0 + mu * q)
        out[i] = np.linalg.norm(d - y)
    return out


def _same_norm(a, b):
    if a.weight_matrix is None or b.weight_matrix is None:
        return a.weight_matrix is None and b.weight_matrix is None
    return np.array_equal(a.weight_matrix, b.weight_matrix)


def distance_to_base(base, x, norm=EUCLIDEAN):
    """Distance (in ``norm``) from each row of ``x`` to the base set."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != base.dim:
        raise ValueError(f"dimension mismatch: points have {x.shape[1]} entries, set has {base.dim}")
    if isinstance(base, IntervalBox):
        return _box_distance(x, base, norm)
    if isinstance(base, BallSet):
        if _same_norm(base.norm, norm):
            return np.maximum(0.0, norm(x - base.center) - base.radius)
        # move to the inflation frame, where the base ball is an ellipsoid
        z = norm.to_frame(x)
        c = norm.to_frame(base.center)
        Ti = np.eye(base.dim) if norm.transform is None else np.linalg.inv(norm.transform)
        M = Ti if base.norm.transform is None else base.norm.transform @ Ti
        return _ellipsoid_distance(z, c, M.T @ M, base.radius)
    raise TypeError(f"unsupported base set {type(base).__name__}")


def membership(prs, x):
    """``(inside, dist, margin)`` with ``margin = inflation - dist``; arrays for batches."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    dist = distance_to_base(prs.base, x, prs.norm)
    margin = prs.inflation - dist
    inside = dist <= prs.inflation
    if single:
        return Membership(bool(inside[0]), float(dist[0]), float(margin[0]))
    return Membership(inside, dist, margin)


@dataclass(frozen=True)
class CoverageRow:
    t: int
    coverage: float
    violations: int
    n_traj: int
    threshold: float
    passed: bool


def coverage_threshold(delta, n_traj):
    return 1.0 - delta - 3.0 * math.sqrt(delta / n_traj)


def coverage_check(prs_seq, ensemble):
    """Fraction of ensemble states inside each set; pass iff >= ``1 - delta - 3 sqrt(delta/N)``."""
    rows = []
    for prs in prs_seq:
        states = ensemble.states_at(prs.t)
        inside = membership(prs, states).inside
        N = len(states)
        cov = float(np.mean(inside))
        thr = coverage_threshold(prs.delta, N)
        rows.append(CoverageRow(prs.t, cov, int(N - inside.sum()), N, thr, cov >= thr))
    return rows


@dataclass(frozen=True)
class LipschitzPRS:
    """Jointly propagated Lipschitz-ball DRS and deviation radius."""

    sets: list
    schedule: object
    drs_radius: np.ndarray
    lipschitz: np.ndarray


def propagate_lipschitz_prs(nominal, r1, r2, rho, lipschitz_fn, sigma2, n, delta,
                            eps=None, norm=EUCLIDEAN):
    """Grow the DRS ball and the deviation radius step by step.

    ``lipschitz_fn(t, center, radius)`` must bound the Lipschitz constant of
    ``f(., u, t)`` on the ball of that radius about ``center`` (in ``norm``);
    it is queried on the current probabilistic set, which contains both the
    deterministic and the stochastic states it has to cover.
    """
    nominal = np.asarray(nominal, dtype=float)
    T = len(nominal) - 1
    s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (T,))
    coef = concentration_coefficient(n, delta, eps)
    L = np.empty(T)
    R = np.empty(T + 1)
    Psi = 0.0
    R[0] = r1
    for t in range(T):
        region = R[t] + math.sqrt(Psi) * math.sqrt(coef)
        L[t] = lipschitz_fn(t, nominal[t], region)
        R[t + 1] = L[t] * R[t] + rho * r2
        Psi = L[t] * L[t] * Psi + s2[t]
    schedule = build_schedule(L, s2, T)
    sets = [make_prs(BallSet(nominal[t], R[t], norm), schedule, n, delta, eps, t, norm)
            for t in range(T + 1)]
    return LipschitzPRS(sets, schedule, R, L)


def _sphere_directions(dim, n_points):
    if dim == 2:
        a = np.linspace(0.0, 2.0 * math.pi, n_points, endpoint=False)
        return np.column_stack([np.cos(a), np.sin(a)])
    if dim == 3:
        # Fibonacci lattice
        i = np.arange(n_points) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / n_points)
        th = math.pi * (1.0 + 5.0 ** 0.5) * i
        return np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])
    raise ValueError("projections must be 2-D or 3-D")


def boundary_points(prs, dims=(0, 1), n_points=128):
    """Points on the boundary of the projection of the set onto ``dims``."""
    dims = list(dims)
    U = _sphere_directions(len(dims), n_points)
    base = prs.base
    if isinstance(base, BallSet) and _same_norm(base.norm, prs.norm):
        total = base.radius + prs.inflation
        P = prs.norm.weight_matrix
        cov = np.eye(base.dim) if P is None else np.linalg.inv(P)
        A = np.linalg.cholesky(cov[np.ix_(dims, dims)])
        return base.center[dims] + total * U @ A.T
    if isinstance(base, IntervalBox) and prs.norm.weight_matrix is None:
        lo, hi = base.lower[dims], base.upper[dims]
        corner = np.where(U >= 0, hi, lo)
        return corner + prs.inflation * U
    raise ValueError("boundary export supports same-norm balls and Euclidean-inflated boxes")
