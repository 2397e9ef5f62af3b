"""System, norm and noise descriptions plus paired trajectory simulation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .expr import compile_dynamics

NOISE_KINDS = ("gaussian", "truncated_gaussian", "uniform_box", "custom_sampler")


class DivergenceError(FloatingPointError):
    """A simulated state became non-finite."""

    def __init__(self, step, index=None):
        self.step = step
        self.index = index
        where = f"step {step}" if index is None else f"trajectory {index}, step {step}"
        super().__init__(f"non-finite state encountered at {where}")


class NotSubGaussianError(ValueError):
    pass


def _as_time_fn(value, what):
    """Turn a constant, a per-step sequence or a callable into ``t -> value``."""
    if value is None:
        return None
    if callable(value):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        c = float(arr)
        return lambda t: c
    seq = arr.copy()

    def at(t):
        if t >= len(seq):
            raise IndexError(f"{what} sequence has no entry for t={t}")
        return float(seq[t])

    return at


@dataclass(frozen=True)
class NormSpec:
    """Euclidean norm, or the weighted norm ``sqrt(x' P x)``.

    All weighted computations go through ``transform = P^{1/2}`` so that
    downstream code only ever deals with Euclidean quantities.
    """

    weight_matrix: Optional[np.ndarray] = None
    transform: Optional[np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.weight_matrix is None:
            object.__setattr__(self, "transform", None)
            return
        P = np.array(self.weight_matrix, dtype=float)
        if P.ndim == 1:
            P = np.diag(P)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.allclose(P, P.T, rtol=0, atol=1e-12 * np.abs(P).max()):
            raise ValueError("weight matrix must be symmetric")
        w, V = np.linalg.eigh(P)
        if w.min() <= 0:
            raise ValueError("weight matrix must be positive definite")
        root = (V * np.sqrt(w)) @ V.T
        root = 0.5 * (root + root.T)
        P.setflags(write=False)
        root.setflags(write=False)
        object.__setattr__(self, "weight_matrix", P)
        object.__setattr__(self, "transform", root)

    @property
    def kind(self):
        return "euclidean" if self.weight_matrix is None else "weighted"

    @property
    def is_diagonal(self):
        P = self.weight_matrix
        return P is None or np.count_nonzero(P - np.diag(np.diag(P))) == 0

    def to_frame(self, x):
        """Map vectors (last axis) into the frame where this norm is Euclidean."""
        x = np.asarray(x, dtype=float)
        if self.transform is None:
            return x
        return x @ self.transform.T

    def from_frame(self, z):
        z = np.asarray(z, dtype=float)
        if self.transform is None:
            return z
        return np.linalg.solve(self.transform, z.T).T

    def __call__(self, x):
        return np.linalg.norm(self.to_frame(x), axis=-1)

    def matrix_norm(self, A):
        """Induced norm of ``A`` from this norm to itself."""
        A = np.asarray(A, dtype=float)
        if self.transform is None:
            return float(np.linalg.norm(A, 2))
        T = self.transform
        return float(np.linalg.norm(T @ A @ np.linalg.inv(T), 2))


EUCLIDEAN = NormSpec()


def weighted_norm(x, norm=EUCLIDEAN):
    x = np.asarray(x, dtype=float)
    if norm.weight_matrix is not None and x.shape[-1] != norm.weight_matrix.shape[0]:
        raise ValueError(
            f"dimension mismatch: vector has {x.shape[-1]} entries, "
            f"norm expects {norm.weight_matrix.shape[0]}")
    out = norm(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class NoiseSpec:
    """Sub-Gaussian additive noise ``w = mixing @ base`` with independent base coordinates.

    ``scale`` holds the per-coordinate standard deviation (gaussian kinds) or
    half-width (``uniform_box``). For ``truncated_gaussian`` each base
    coordinate is replaced by the state-dependent ``cap`` whenever the cap has
    smaller magnitude; ``cap(candidate, t)`` receives the pre-noise candidate
    state ``f(x, u, t)``. ``custom_sampler`` draws with ``sampler(t, rng, size)``.
    """

    kind: str
    dim: int
    scale: Optional[np.ndarray] = None
    mixing: Optional[np.ndarray] = None
    cap: Optional[Callable] = None
    sampler: Optional[Callable] = None
    variance_proxy: object = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "custom_sampler":
            if self.sampler is None:
                raise ValueError("custom_sampler noise needs a sampler")
        else:
            if self.scale is None:
                raise ValueError(f"{self.kind} noise needs a scale")
            scale = np.asarray(self.scale, dtype=float)
            if scale.ndim == 0:
                k = self.dim if self.mixing is None else np.shape(self.mixing)[1]
                scale = np.full(k, float(scale))
            if np.any(scale < 0) or not np.all(np.isfinite(scale)):
                raise ValueError("noise scale must be finite and non-negative")
            object.__setattr__(self, "scale", scale)
        if self.mixing is not None:
            M = np.asarray(self.mixing, dtype=float)
            if M.shape[0] != self.dim:
                raise ValueError("mixing matrix rows must equal the noise dimension")
            object.__setattr__(self, "mixing", M)
        elif self.scale is not None and len(self.scale) != self.dim:
            raise ValueError("scale length must equal the noise dimension")
        if self.kind == "truncated_gaussian" and self.cap is None:
            raise ValueError("truncated_gaussian noise needs a cap callback")

    @property
    def base_dim(self):
        return len(self.scale) if self.scale is not None else self.dim

    def sample(self, rng, t=0, size=1, candidate=None):
        """Draw ``size`` noise vectors, shape ``(size, dim)``."""
        if self.kind == "custom_sampler":
            w = np.asarray(self.sampler(t, rng, size), dtype=float)
            return w.reshape(size, self.dim)
        k = self.base_dim
        if self.kind == "uniform_box":
            base = rng.uniform(-1.0, 1.0, size=(size, k)) * self.scale
        else:
            base = rng.standard_normal((size, k)) * self.scale
            if self.kind == "truncated_gaussian":
                if candidate is None:
                    raise ValueError("truncated_gaussian sampling needs the candidate state")
                cap = np.broadcast_to(
                    np.asarray(self.cap(np.asarray(candidate, dtype=float), t), dtype=float),
                    base.shape)
                # keep whichever of (draw, cap) has the smaller magnitude
                base = np.where(np.abs(base) <= np.abs(cap), base, cap)
        if self.mixing is not None:
            base = base @ self.mixing.T
        return base

    def closed_form_sigma(self, norm=EUCLIDEAN):
        """Exact proxy for gaussian / uniform_box noise, ``None`` otherwise.

        ``<l, T M D z>`` with independent unit-proxy ``z`` is sub-Gaussian with
        proxy ``|D M' T' l|^2``, whose maximum over unit ``l`` is the squared
        spectral norm of ``T M D``. For uniform noise this is Hoeffding's bound.
        """
        if self.kind not in ("gaussian", "uniform_box"):
            return None
        S = np.diag(self.scale)
        if self.mixing is not None:
            S = self.mixing @ S
        if norm.transform is not None:
            S = norm.transform @ S
        return float(np.linalg.norm(S, 2))

    def sigma2(self, t):
        """Variance proxy at step ``t`` (Euclidean frame unless certified otherwise)."""
        if self.variance_proxy is not None:
            return _as_time_fn(self.variance_proxy, "variance proxy")(t)
        s = self.closed_form_sigma()
        if s is None:
            raise ValueError(
                f"{self.kind} noise has no closed-form proxy; certify one first")
        return s * s

    def with_proxy(self, variance_proxy):
        return NoiseSpec(self.kind, self.dim, self.scale, self.mixing, self.cap,
                         self.sampler, variance_proxy)


def default_lambda_grid():
    pos = np.logspace(-2, 1, 31)
    return np.concatenate([-pos[::-1], pos])


def certify_variance_proxy(noise, norm=EUCLIDEAN, n_samples=100_000, lambda_grid=None,
                           seed=0, t=0, candidate=None, n_directions=64,
                           inflation=1.05, divergence_ratio=4.0, max_rel_se=0.05):
    """Smallest sigma with ``E exp(lam <l, w>) <= exp(lam^2 sigma^2 / 2)`` on a grid.

    Gaussian and uniform-box noise return their exact proxy without sampling.
    Otherwise the noise is sampled, mapped into the frame of ``norm``,
    centred, and divided by its largest principal standard deviation ``s``;
    ``lambda_grid`` is read in units of ``1/s``. The bound is checked along
    ``n_directions`` random unit directions plus the principal axes, and the
    result is inflated by ``inflation``. Grid points whose MGF estimate has a
    relative standard error above ``max_rel_se`` are too poorly resolved by
    the sample to enter the proxy; they still take part in the divergence
    check.

    Raises NotSubGaussianError when the empirical log-MGF ratio exceeds
    ``divergence_ratio`` times the worst-direction variance, the signature of
    a tail heavier than Gaussian on the grid.
    """
    exact = noise.closed_form_sigma(norm)
    if exact is not None:
        return exact
    if n_samples < 10_000:
        raise ValueError("need at least 10^4 samples to certify a variance proxy")
    grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if grid.min() > -10 or grid.max() < 10:
        raise ValueError("lambda grid must span at least [-10, 10]")
    grid = grid[grid != 0]

    rng = np.random.default_rng(seed)
    if noise.kind == "truncated_gaussian" and candidate is None:
        raise ValueError("state-dependent noise needs the candidate state")
    cand = None if candidate is None else np.broadcast_to(
        np.asarray(candidate, dtype=float), (n_samples, np.size(candidate)))
    w = noise.sample(rng, t=t, size=n_samples, candidate=cand)
    y = norm.to_frame(w)
    y = y - y.mean(axis=0)
    cov = np.atleast_2d(np.cov(y, rowvar=False))
    evals, evecs = np.linalg.eigh(cov)
    top = float(evals[-1])
    if top <= 0:
        return 0.0
    s = np.sqrt(top)
    z = y / s

    dirs = rng.standard_normal((n_directions, noise.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs = np.vstack([dirs, evecs.T])
    proj = z @ dirs.T
    worst = 0.0
    peak = 0.0
    for lam in grid:
        with np.errstate(over="raise"):
            try:
                e = np.exp(lam * proj)
            except FloatingPointError:
                raise NotSubGaussianError(f"empirical MGF overflows at lambda={lam}") from None
        m = e.mean(axis=0)
        g = 2.0 * np.log(m) / (lam * lam)
        if not np.all(np.isfinite(g)):
            raise NotSubGaussianError(f"empirical MGF diverges at lambda={lam}")
        peak = max(peak, float(g.max()))
        resolved = e.std(axis=0) / (np.sqrt(n_samples) * m) <= max_rel_se
        if resolved.any():
            worst = max(worst, float(g[resolved].max()))
    if peak > divergence_ratio:
        raise NotSubGaussianError(
            f"empirical MGF grows like a heavy tail (ratio {peak:.2f} > {divergence_ratio})")
    return float(inflation * s * np.sqrt(worst))


@dataclass(frozen=True)
class InputBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("input box needs lower <= upper of equal length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, len(self.lower)))


@dataclass(frozen=True)
class SystemModel:
    """Discrete-time dynamics ``x+ = f(x, u, t)`` with Lipschitz data.

    ``step`` must accept a batch of states with components on the last axis.
    ``lipschitz`` gives ``L_t`` (constant, sequence or callable); systems with
    only local constants supply ``local_lipschitz(center, radius, t)``
    instead. ``expressions`` is present for models written in the primitive
    vocabulary, which is what the interval backend needs.
    """

    dim_state: int
    step: Callable
    dim_input: int = 0
    lipschitz: object = None
    input_set: Optional[InputBox] = None
    expressions: Optional[Sequence[str]] = None
    params: dict = field(default_factory=dict)
    local_lipschitz: Optional[Callable] = None
    name: str = "custom"

    @classmethod
    def from_expressions(cls, expressions, dim_state, dim_input=0, params=None, **kw):
        params = dict(params or {})
        f = compile_dynamics(expressions, dim_state, dim_input, params)

        def step(x, u=None, t=0):
            x = np.asarray(x, dtype=float)
            if u is None:
                u = np.zeros(x.shape[:-1] + (dim_input,))
            comps = np.broadcast_arrays(*f(x, np.asarray(u, dtype=float), t),
                                        np.empty(x.shape[:-1]))
            return np.stack(comps[:-1], axis=-1)

        return cls(dim_state=dim_state, step=step, dim_input=dim_input,
                   expressions=tuple(expressions), params=params, **kw)

    def lipschitz_at(self, t):
        fn = _as_time_fn(self.lipschitz, "lipschitz")
        if fn is None:
            raise ValueError(f"model {self.name!r} has no global Lipschitz constants")
        L = fn(t)
        if not np.isfinite(L) or L < 0:
            raise ValueError(f"invalid Lipschitz constant {L} at t={t}")
        return L


def _inputs_at(inputs, t, n_traj, dim_input):
    if dim_input == 0:
        return np.zeros((n_traj, 0))
    if inputs is None:
        return np.zeros((n_traj, dim_input))
    if callable(inputs):
        return np.broadcast_to(np.asarray(inputs(t), dtype=float), (n_traj, dim_input))
    arr = np.asarray(inputs, dtype=float)
    if arr.ndim == 3:
        return arr[:, t, :]
    return np.broadcast_to(arr[t], (n_traj, dim_input))


def simulate_batch(model, noise, x0, horizon, rng, inputs=None, record=None, index_offset=0):
    """Simulate stochastic trajectories and their associated noiseless twins.

    ``x0`` has shape ``(N, n)``; ``inputs`` is ``None``, an array ``(T, p)``
    shared by all trajectories, an array ``(N, T, p)``, or ``t -> u``.
    Returns ``(X, x)`` of shape ``(N, K, n)`` holding the times in ``record``
    (default: every ``t = 0..T``).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise ValueError("initial state must be finite")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    N, n = x0.shape
    times = np.arange(horizon + 1) if record is None else np.asarray(sorted(set(record)), dtype=int)
    if times.size and (times[0] < 0 or times[-1] > horizon):
        raise ValueError("record times must lie in [0, horizon]")
    slot = {int(tt): k for k, tt in enumerate(times)}
    X_out = np.empty((N, len(times), n))
    x_out = np.empty((N, len(times), n))
    X = x0.copy()
    x = x0.copy()
    if 0 in slot:
        X_out[:, slot[0]] = X
        x_out[:, slot[0]] = x
    for t in range(horizon):
        u = _inputs_at(inputs, t, N, model.dim_input)
        # non-finite states are caught below with their location
        with np.errstate(over="ignore", invalid="ignore"):
            cand = model.step(X, u, t)
            X = cand + noise.sample(rng, t=t, size=N, candidate=cand)
            x = model.step(x, u, t)
        bad = ~(np.all(np.isfinite(X), axis=1) & np.all(np.isfinite(x), axis=1))
        if bad.any():
            raise DivergenceError(t + 1, index_offset + int(np.argmax(bad)))
        if t + 1 in slot:
            X_out[:, slot[t + 1]] = X
            x_out[:, slot[t + 1]] = x
    return X_out, x_out


def simulate_pair(model, noise, x0, input_seq=None, horizon=0, rng_seed=0):
    """One stochastic trajectory and its associated deterministic trajectory.

    Both start at ``x0`` and share ``input_seq``; each is ``(T+1, n)``.
    """
    rng = np.random.default_rng(rng_seed)
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    if input_seq is not None and not callable(input_seq):
        input_seq = np.asarray(input_seq, dtype=float).reshape(horizon, -1) if horizon else None
    try:
        X, x = simulate_batch(model, noise, x0, horizon, rng, inputs=input_seq)
    except DivergenceError as exc:
        raise DivergenceError(exc.step) from None
    return X[0], x[0]
