"""Scalar interval arithmetic with exact-range rules for each primitive.

Arithmetic (``+``, ``-``, ``*``, integer powers) uses round-to-nearest at the
endpoints; rounding is monotone, so the result still encloses every
floating-point evaluation of the same expression at points inside the
operands. Transcendental primitives and division are widened by one ulp on
each side because library implementations are only faithfully rounded.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """A primitive was applied to an interval reaching outside its domain."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (at step {step})"
        super().__init__(message)


def _down(x):
    return float(np.nextafter(x, -np.inf))


def _up(x):
    return float(np.nextafter(x, np.inf))


class Interval:
    """Closed interval ``[lo, hi]`` of reals."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        lo = float(lo)
        hi = float(hi)
        if not lo <= hi:
            raise ValueError(f"inverted interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def coerce(x):
        return x if isinstance(x, Interval) else Interval(x, x)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x):
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    # arithmetic

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = Interval.coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = Interval.coerce(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Interval):
            c = float(other)
            if c >= 0:
                return Interval(self.lo * c, self.hi * c)
            return Interval(self.hi * c, self.lo * c)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(p), max(p))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Interval.coerce(other)
        if other.lo <= 0.0 <= other.hi:
            raise DomainError(f"division by interval {other!r} containing zero")
        inv = Interval(_down(1.0 / other.hi), _up(1.0 / other.lo))
        return self * inv

    def __rtruediv__(self, other):
        return Interval.coerce(other) / self

    def __pow__(self, p):
        if isinstance(p, Interval):
            if p.lo != p.hi:
                raise DomainError("interval exponents are not supported")
            p = p.lo
        p = float(p)
        if p == int(p):
            k = int(p)
            if k == 0:
                return Interval(1.0)
            if k < 0:
                return Interval(1.0) / (self ** (-k))
            a, b = self.lo ** k, self.hi ** k
            if k % 2 == 1:
                return Interval(a, b)
            if self.lo >= 0.0:
                return Interval(a, b)
            if self.hi <= 0.0:
                return Interval(b, a)
            return Interval(0.0, max(a, b))
        if self.lo < 0.0:
            raise DomainError(f"non-integer power of {self!r}")
        return Interval(_down(self.lo ** p), _up(self.hi ** p))

    # elementary functions

    def log1p(self):
        if self.lo <= -1.0:
            raise DomainError(f"log1p of {self!r}")
        return Interval(_down(math.log1p(self.lo)), _up(math.log1p(self.hi)))

    def log(self):
        if self.lo <= 0.0:
            raise DomainError(f"log of {self!r}")
        return Interval(_down(math.log(self.lo)), _up(math.log(self.hi)))

    def exp(self):
        return Interval(max(0.0, _down(math.exp(self.lo))), _up(math.exp(self.hi)))

    def sqrt(self):
        if self.lo < 0.0:
            raise DomainError(f"sqrt of {self!r}")
        return Interval(max(0.0, _down(math.sqrt(self.lo))), _up(math.sqrt(self.hi)))

    def sin(self):
        return _periodic_range(self, math.sin, peak=0.5 * math.pi, trough=1.5 * math.pi)

    def cos(self):
        return _periodic_range(self, math.cos, peak=0.0, trough=math.pi)

    def tan(self):
        # branch index of the nearest pole below each endpoint
        k_lo = math.floor((self.lo + 0.5 * math.pi) / math.pi)
        k_hi = math.floor((self.hi + 0.5 * math.pi) / math.pi)
        if k_lo != k_hi:
            raise DomainError(f"tan of {self!r} crosses a pole")
        return Interval(_down(math.tan(self.lo)), _up(math.tan(self.hi)))

    def atan(self):
        return Interval(_down(math.atan(self.lo)), _up(math.atan(self.hi)))

    def __abs__(self):
        if self.lo >= 0.0:
            return self
        if self.hi <= 0.0:
            return -self
        return Interval(0.0, max(-self.lo, self.hi))


def _contains_phase(iv, phase):
    # is phase + 2k*pi inside iv for some integer k
    k = math.ceil((iv.lo - phase) / TWO_PI)
    return phase + k * TWO_PI <= iv.hi


def _periodic_range(iv, fn, peak, trough):
    if iv.hi - iv.lo >= TWO_PI:
        return Interval(-1.0, 1.0)
    a, b = fn(iv.lo), fn(iv.hi)
    lo = -1.0 if _contains_phase(iv, trough) else max(-1.0, _down(min(a, b)))
    hi = 1.0 if _contains_phase(iv, peak) else min(1.0, _up(max(a, b)))
    return Interval(lo, hi)


def imin(a, b):
    if isinstance(a, Interval) or isinstance(b, Interval):
        a, b = Interval.coerce(a), Interval.coerce(b)
        return Interval(min(a.lo, b.lo), min(a.hi, b.hi))
    return np.minimum(a, b)


def imax(a, b):
    if isinstance(a, Interval) or isinstance(b, Interval):
        a, b = Interval.coerce(a), Interval.coerce(b)
        return Interval(max(a.lo, b.lo), max(a.hi, b.hi))
    return np.maximum(a, b)


def _unary(name, np_fn):
    def fn(x):
        if isinstance(x, Interval):
            return getattr(x, name)()
        return np_fn(x)

    fn.__name__ = name
    return fn


log1p = _unary("log1p", np.log1p)
log = _unary("log", np.log)
exp = _unary("exp", np.exp)
sqrt = _unary("sqrt", np.sqrt)
sin = _unary("sin", np.sin)
cos = _unary("cos", np.cos)
tan = _unary("tan", np.tan)
atan = _unary("atan", np.arctan)


def iabs(x):
    return abs(x) if isinstance(x, Interval) else np.abs(x)


def hull(a, b):
    return Interval(min(a.lo, b.lo), max(a.hi, b.hi))
