r"""Sphere-averaged moment generating function and checks of its properties.

For a vector of norm ``r`` the average of ``exp(lam <l, x>)`` over unit
directions ``l`` in :math:`\mathbb{R}^n` is

.. math::
    \Phi_{n,\lambda}(r) = \sum_{k\ge0} \frac{(\lambda^2 r^2/4)^k}{k!\,(n/2)_k}
                        = {}_0F_1(;n/2;\lambda^2 r^2/4),

which reduces to ``cosh(lam r)`` for ``n = 1`` and ``sinh(lam r)/(lam r)`` for
``n = 3``. The independent reference is the polar-angle integral

.. math::
    \Phi_{n,\lambda}(r) = \frac{\int_0^\pi e^{\lambda r\cos\theta}\sin^{n-2}\theta\,d\theta}
                               {\int_0^\pi \sin^{n-2}\theta\,d\theta}.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .deviation import epsilon_constants

SERIES_LIMIT = 30.0
MAX_TERMS = 1000


class SeriesDivergence(ArithmeticError):
    pass


def amgf_series(n, lam, r, tol=1e-15, max_terms=MAX_TERMS):
    """Rising-factorial series; raises SeriesDivergence if not converged in ``max_terms``."""
    z = 0.25 * (lam * r) ** 2
    term = 1.0
    total = 1.0
    a = 0.5 * n
    for k in range(max_terms):
        term *= z / ((k + 1) * (a + k))
        total += term
        if term <= tol * total:
            return total
    raise SeriesDivergence(f"series for n={n}, lam*r={lam * r} did not converge")


def amgf_quadrature_oracle(n, lam, r, nodes=256):
    """Gauss-Legendre evaluation of the polar-angle integral (``n >= 2``)."""
    if n < 2:
        raise ValueError("the quadrature oracle needs n >= 2")
    if nodes < 64:
        raise ValueError("use at least 64 nodes")
    x = abs(lam * r)
    if x == 0.0:
        return 1.0
    nodes_, weights = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * math.pi * (nodes_ + 1.0)
    w = 0.5 * math.pi * weights
    jac = np.sin(theta) ** (n - 2)
    # factor out exp(x) so the integrand stays in [0, 1]
    num = np.sum(w * np.exp(x * (np.cos(theta) - 1.0)) * jac)
    den = np.sum(w * jac)
    return float(math.exp(x) * num / den)


def amgf(n, lam, r, tol=1e-15):
    """``Phi_{n,lam}`` at any vector of norm ``r``."""
    if n < 1:
        raise ValueError("dimension must be at least 1")
    if not math.isfinite(r) or r < 0:
        raise ValueError("r must be a finite non-negative number")
    x = abs(lam * r)
    if x == 0.0:
        return 1.0
    if n == 1:
        return math.cosh(x)
    if n == 3:
        return math.sinh(x) / x
    if x <= SERIES_LIMIT:
        try:
            return amgf_series(n, lam, r, tol)
        except SeriesDivergence:
            pass
    return amgf_quadrature_oracle(n, lam, r, nodes=max(512, 16 * int(math.sqrt(x))))


def amgf_vector(lam, x):
    """``Phi`` at a vector (or batch of vectors on the last axis)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    r = np.linalg.norm(x, axis=-1)
    if r.ndim == 0:
        return amgf(n, lam, float(r))
    return amgf_array(n, lam, r)


@dataclass
class AmgfEvaluator:
    """Fixed-dimension evaluator with a selectable method."""

    n: int
    method: str = "auto"
    tolerance: float = 1e-15
    nodes: int = 256

    def __post_init__(self):
        if self.method not in ("auto", "closed_form", "bessel_series", "quadrature"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "closed_form" and self.n not in (1, 3):
            raise ValueError("closed forms exist only for n = 1 and n = 3")

    def __call__(self, lam, r):
        if self.method == "bessel_series":
            return amgf_series(self.n, lam, r, self.tolerance)
        if self.method == "quadrature":
            return amgf_quadrature_oracle(self.n, lam, r, self.nodes)
        return amgf(self.n, lam, r, self.tolerance)


@dataclass
class CheckReport:
    name: str
    passed: bool
    estimate: float
    limit: float
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "estimate": float(self.estimate),
                "limit": float(self.limit), **{k: _plain(v) for k, v in self.details.items()}}


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _noise(kind, n, sigma, rng, size):
    if kind == "gaussian":
        return sigma * rng.standard_normal((size, n))
    if kind == "uniform":
        # uniform on [-sigma, sigma]^n has proxy sigma (Hoeffding)
        return rng.uniform(-sigma, sigma, size=(size, n))
    raise ValueError(f"unknown noise kind {kind!r}")


def verify_decoupling(n, lam, sigma, x, n_samples=100_000, noise="gaussian", seed=0):
    """Monte Carlo check of ``E_w Phi(x + w) <= exp(lam^2 sigma^2 / 2) Phi(x)``.

    Passes iff the sample mean is at most the right side plus three standard errors.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x must have shape ({n},)")
    rhs = math.exp(0.5 * (lam * sigma) ** 2) * amgf(n, lam, float(np.linalg.norm(x)))
    if sigma == 0 or lam == 0:
        est = amgf(n, lam, float(np.linalg.norm(x)))
        return CheckReport("decoupling", est <= rhs, est, rhs, {"stderr": 0.0, "n": n})
    rng = np.random.default_rng(seed)
    w = _noise(noise, n, sigma, rng, n_samples)
    vals = amgf_array(n, lam, np.linalg.norm(x + w, axis=1))
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    return CheckReport("decoupling", est <= rhs + 3 * se, est, rhs,
                       {"stderr": se, "n": n, "lambda": lam, "sigma": sigma, "noise": noise})


def amgf_array(n, lam, r, tol=1e-15):
    """Vectorised ``Phi_{n,lam}`` over an array of radii."""
    r = np.asarray(r, dtype=float)
    x = np.abs(lam * r)
    if n == 1:
        return np.cosh(x)
    if n == 3:
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.sinh(x) / x
        return np.where(x == 0.0, 1.0, out)
    out = np.empty_like(x)
    small = x <= SERIES_LIMIT
    z = 0.25 * x[small] ** 2
    term = np.ones_like(z)
    total = np.ones_like(z)
    a = 0.5 * n
    for k in range(MAX_TERMS):
        term = term * z / ((k + 1) * (a + k))
        total += term
        if np.all(term <= tol * total):
            break
    out[small] = total
    for idx in np.flatnonzero(~small):
        out.flat[idx] = amgf(n, lam, float(r.flat[idx]))
    return out


def verify_norm_concentration(n, sigma, delta, epsilon=1.0 / 16, n_samples=100_000,
                              noise="gaussian", seed=0):
    """Empirical frequency of ``|X| > sqrt(sigma^2 (eps1 n + eps2 log(1/delta)))``.

    Passes iff the frequency is at most ``delta + 3 sqrt(delta / n_samples)``.
    """
    e = epsilon_constants(epsilon)
    radius = math.sqrt(sigma * sigma * (e.eps1 * n + e.eps2 * math.log(1.0 / delta)))
    rng = np.random.default_rng(seed)
    X = _noise(noise, n, sigma, rng, n_samples)
    norms = np.linalg.norm(X, axis=1)
    rate = float(np.mean(norms > radius))
    limit = delta + 3.0 * math.sqrt(delta / n_samples)
    return CheckReport("norm_concentration", rate <= limit, rate, limit,
                       {"radius": radius, "n": n, "sigma": sigma, "delta": delta,
                        "epsilon": epsilon, "noise": noise, "samples": n_samples})


def run_lemma_suite(n_samples=100_000, seed=0, max_n=10, max_x=30.0):
    """Every AMGF check in one report: series vs quadrature, closed forms, decoupling, concentration."""
    reports = []
    xs = np.linspace(0.0, max_x, 61)
    worst = 0.0
    for n in range(2, max_n + 1):
        for x in xs:
            ref = amgf_quadrature_oracle(n, 1.0, x, nodes=512)
            worst = max(worst, abs(amgf_series(n, 1.0, x) - ref) / ref)
    reports.append(CheckReport("series_vs_quadrature", worst <= 1e-7, worst, 1e-7,
                               {"max_n": max_n, "max_lambda_r": max_x}))
    for n, exact in ((1, np.cosh), (3, lambda x: np.sinh(x) / x)):
        err = max(abs(amgf_series(n, 1.0, x) - exact(x)) / exact(x) for x in xs[1:])
        reports.append(CheckReport(f"closed_form_n{n}", err <= 1e-9, err, 1e-9, {"n": n}))
    cases = [(2, 1.0, 1.0, [0.5, -0.3]), (3, 2.0, 0.5, [0.0, 0.0, 0.0]),
             (5, 0.7, 1.0, [1.0, 0.0, -1.0, 0.5, 0.2]), (10, 0.5, 1.0, np.ones(10) * 0.3)]
    for i, (n, lam, sigma, x) in enumerate(cases):
        for kind in ("gaussian", "uniform"):
            r = verify_decoupling(n, lam, sigma, np.asarray(x, dtype=float), n_samples, kind,
                                  seed + 10 * i)
            r.name = f"decoupling_n{n}_{kind}"
            reports.append(r)
    for i, (n, delta) in enumerate(((2, 1e-2), (2, 1e-3), (5, 1e-2), (10, 1e-2))):
        for kind in ("gaussian", "uniform"):
            r = verify_norm_concentration(n, 1.0, delta, 1.0 / 16, n_samples, kind, seed + 100 + i)
            r.name = f"norm_concentration_n{n}_delta{delta:g}_{kind}"
            reports.append(r)
    return {"passed": all(r.passed for r in reports), "samples": n_samples, "seed": seed,
            "checks": [r.to_dict() for r in reports]}
