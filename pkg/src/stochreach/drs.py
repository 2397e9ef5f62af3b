"""Over-approximations of the deterministic reachable set.

Two backends: balls grown by Lipschitz constants around a nominal
trajectory, and interval boxes propagated through the embedding system of a
natural inclusion function.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expr import compile_dynamics
from .interval import DomainError, Interval
from .model import EUCLIDEAN, NormSpec


class InclusionError(RuntimeError):
    """An inclusion function returned inverted bounds."""


class InvertedBoundsError(ValueError):
    pass


@dataclass(frozen=True)
class BallSet:
    center: np.ndarray
    radius: float
    norm: NormSpec = EUCLIDEAN

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if not self.radius >= 0:
            raise ValueError(f"radius must be non-negative, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def contains(self, x, tol=0.0):
        return self.norm(np.asarray(x, dtype=float) - self.center) <= self.radius + tol


@dataclass(frozen=True)
class IntervalBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lo > hi):
            raise InvertedBoundsError("box needs lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_intervals(cls, ivs):
        return cls([i.lo for i in ivs], [i.hi for i in ivs])

    @classmethod
    def point(cls, x):
        return cls(x, x)

    @property
    def dim(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    def intervals(self):
        return [Interval(lo, hi) for lo, hi in zip(self.lower, self.upper)]

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def bounding_radius(self, norm=EUCLIDEAN):
        """Radius of the smallest ``norm``-ball about the centre that covers the box."""
        half = 0.5 * self.width
        corners = np.array(np.meshgrid(*[[-h, h] for h in half])).reshape(self.dim, -1).T
        return float(np.max(norm(corners)))


InclusionFunction = Callable[[IntervalBox, IntervalBox, int], IntervalBox]


def lipschitz_radius(L_d, rho, r1, r2, t):
    """``L^t r1 + rho r2 (L^t - 1)/(L - 1)``; the input term is ``rho r2 t`` at ``L = 1``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if L_d == 1.0:
        return r1 + rho * r2 * t
    Lt = L_d ** t
    return Lt * r1 + rho * r2 * (Lt - 1.0) / (L_d - 1.0)


def lipschitz_drs(nominal, L_d, rho, r1, r2, t, norm=EUCLIDEAN):
    """Ball about the nominal state ``x*_t`` covering every trajectory that starts
    within ``r1`` of ``x*_0`` and whose inputs stay within ``r2`` of the nominal ones."""
    nominal = np.atleast_2d(np.asarray(nominal, dtype=float))
    return BallSet(nominal[t], lipschitz_radius(L_d, rho, r1, r2, t), norm)


def lipschitz_radii(lipschitz, rho, r1, r2, horizon):
    """Time-varying version: ``R_{t+1} = L_t R_t + rho_t r2`` with ``R_0 = r1``."""
    L = np.broadcast_to(np.asarray(lipschitz, dtype=float), (horizon,))
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (horizon,))
    R = np.empty(horizon + 1)
    R[0] = r1
    for t in range(horizon):
        R[t + 1] = L[t] * R[t] + rho[t] * r2
    return R


def interval_step(inc, box, input_box, t):
    """One step of the embedding system. ``inc`` may return an IntervalBox or a
    ``(lower, upper)`` pair."""
    try:
        out = inc(box, input_box, t)
        if not isinstance(out, IntervalBox):
            out = IntervalBox(*out)
    except DomainError as exc:
        raise DomainError(str(exc).split(" (at step")[0], step=t) from None
    except InvertedBoundsError:
        raise InclusionError(f"inclusion function returned inverted bounds at t={t}") from None
    return out


def natural_inclusion(model):
    """Interval extension of a model written in the primitive vocabulary."""
    if not model.expressions:
        raise ValueError(f"model {model.name!r} is not expressed in primitive operations")
    f = compile_dynamics(model.expressions, model.dim_state, model.dim_input, model.params)

    def inc(box, input_box, t):
        xs = box.intervals()
        us = input_box.intervals() if input_box is not None else []
        out = [Interval.coerce(v) for v in f(xs, us, t)]
        return IntervalBox.from_intervals(out)

    return inc


def interval_reach(inc, x0_box, input_box, horizon):
    """Embedding-system trajectory ``[lower_t, upper_t]`` for ``t = 0..T``."""
    boxes = [x0_box]
    for t in range(horizon):
        boxes.append(interval_step(inc, boxes[-1], input_box, t))
    return boxes
