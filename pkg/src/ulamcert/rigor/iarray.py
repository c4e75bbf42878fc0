"""Vectorised intervals: a pair of float64 arrays with the rounding rules of
:mod:`ulamcert.rigor.rounding` applied elementwise.

Used wherever thousands of enclosures are computed at once (grid-point
preimages, subdivision sweeps).  Scalar :class:`Interval` operands broadcast.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..errors import DomainError
from .interval import Interval, to_fraction

_INF = np.inf
_MAX = np.finfo(np.float64).max
_SPLIT = 134217729.0
_TINY = 2.0 ** -960
_HUGE = 2.0 ** 990
_LIBM_ULPS = 2


def _down(x):
    return np.nextafter(x, -_INF)


def _up(x):
    return np.nextafter(x, _INF)


def _two_prod_err(a, b, p):
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_dir(a, b, upward):
    with np.errstate(invalid="ignore", over="ignore"):
        s = a + b
        bb = s - a
        e = (a - (s - bb)) + (b - bb)
    if upward:
        out = np.where(e > 0, _up(s), s)
        bad = np.isinf(s) & (s < 0) & np.isfinite(a) & np.isfinite(b)
        return np.where(bad, -_MAX, out)
    out = np.where(e < 0, _down(s), s)
    bad = np.isinf(s) & (s > 0) & np.isfinite(a) & np.isfinite(b)
    return np.where(bad, _MAX, out)


def mul_dir(a, b, upward):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
        e = _two_prod_err(a, b, p)
    zero = (a == 0.0) | (b == 0.0)
    risky = (np.abs(p) < _TINY) | (np.abs(a) > _HUGE) | (np.abs(b) > _HUGE) | ~np.isfinite(e)
    if upward:
        out = np.where(risky, _up(p), np.where(e > 0, _up(p), p))
    else:
        out = np.where(risky, _down(p), np.where(e < 0, _down(p), p))
    inf = np.isinf(p)
    fin = np.isfinite(a) & np.isfinite(b)
    if upward:
        out = np.where(inf, np.where(fin & (p < 0), -_MAX, p), out)
    else:
        out = np.where(inf, np.where(fin & (p > 0), _MAX, p), out)
    return np.where(zero, 0.0, out)


def div_dir(a, b, upward):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore", under="ignore"):
        q = a / b
        p = q * b
        e = _two_prod_err(q, b, p)
        r = (p - a) + e
    risky = (~np.isfinite(q)) | (q == 0.0) | (np.abs(q) < _TINY) | (np.abs(q) > _HUGE) \
        | (np.abs(a) < _TINY) | (np.abs(b) > _HUGE) | ~np.isfinite(r)
    over = (r > 0) == (b > 0)
    exact = r == 0.0
    if upward:
        out = np.where(exact | over, q, _up(q))
        out = np.where(risky, _up(q), out)
    else:
        out = np.where(exact | ~over, q, _down(q))
        out = np.where(risky, _down(q), out)
    out = np.where(np.isinf(b) & np.isfinite(a), 0.0, out)
    out = np.where(np.isinf(a) & np.isfinite(b), q, out)
    return np.where(a == 0.0, 0.0, out)


def sqrt_dir(x, upward):
    with np.errstate(invalid="ignore", over="ignore"):
        s = np.sqrt(x)
        p = s * s
        r = (p - x) + _two_prod_err(s, s, p)
    risky = (x < _TINY) | (x > _HUGE) | ~np.isfinite(r)
    if upward:
        out = np.where((r >= 0), s, _up(s))
        out = np.where(risky, _up(s), out)
    else:
        out = np.where((r <= 0), s, _down(s))
        out = np.maximum(np.where(risky, _down(s), out), 0.0)
    return np.where((x == 0.0) | np.isinf(x), x, out)


def _widen(y, upward):
    for _ in range(_LIBM_ULPS):
        y = _up(y) if upward else _down(y)
    return y


def exp_dir(x, upward):
    with np.errstate(over="ignore"):
        y = np.exp(x)
    out = _widen(y, upward)
    if not upward:
        out = np.maximum(np.where(np.isinf(y), _MAX, out), 0.0)
    out = np.where(x == 0.0, 1.0, out)
    return np.where(x == -_INF, 0.0, out)


def log_dir(x, upward):
    with np.errstate(divide="ignore"):
        y = np.log(x)
    out = _widen(y, upward)
    out = np.where(x == 1.0, 0.0, out)
    out = np.where(x == 0.0, -_INF, out)
    if not upward:
        out = np.where(np.isinf(x), _MAX, out)
    return out


class IArray:
    """Array of intervals.  ``lo`` and ``hi`` are float64 arrays of equal shape."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 100

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=np.float64)
        hi = lo if hi is None else np.asarray(hi, dtype=np.float64)
        lo, hi = np.broadcast_arrays(lo, hi)
        self.lo = lo
        self.hi = hi

    @classmethod
    def points(cls, x):
        x = np.asarray(x, dtype=np.float64)
        return cls(x, x.copy())

    def __len__(self):
        return self.lo.shape[0]

    @property
    def shape(self):
        return self.lo.shape

    def __getitem__(self, idx):
        lo, hi = self.lo[idx], self.hi[idx]
        if np.ndim(lo) == 0:
            return Interval(float(lo), float(hi))
        return IArray(lo, hi)

    def __repr__(self):
        return f"IArray(lo={self.lo!r}, hi={self.hi!r})"

    @property
    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def width(self):
        return add_dir(self.hi, -self.lo, True)

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        return np.where(self.lo > 0, self.lo, np.where(self.hi < 0, -self.hi, 0.0))

    def __neg__(self):
        return IArray(-self.hi, -self.lo)

    def __add__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return IArray(add_dir(self.lo, o.lo, False), add_dir(self.hi, o.hi, True))

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return IArray(add_dir(self.lo, -o.hi, False), add_dir(self.hi, -o.lo, True))

    def __rsub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        a, b, c, d = self.lo, self.hi, o.lo, o.hi
        if np.all(a >= 0) and np.all(c >= 0):
            return IArray(mul_dir(a, c, False), mul_dir(b, d, True))
        if np.all(a >= 0) and np.all(d <= 0):
            return IArray(mul_dir(b, c, False), mul_dir(a, d, True))
        if np.all(b <= 0) and np.all(c >= 0):
            return IArray(mul_dir(a, d, False), mul_dir(b, c, True))
        if np.all(b <= 0) and np.all(d <= 0):
            return IArray(mul_dir(b, d, False), mul_dir(a, c, True))
        lo = np.minimum(np.minimum(mul_dir(a, c, False), mul_dir(a, d, False)),
                        np.minimum(mul_dir(b, c, False), mul_dir(b, d, False)))
        hi = np.maximum(np.maximum(mul_dir(a, c, True), mul_dir(a, d, True)),
                        np.maximum(mul_dir(b, c, True), mul_dir(b, d, True)))
        return IArray(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        c, d = o.lo, o.hi
        if np.any((c <= 0) & (d >= 0)):
            raise DomainError("division by an interval containing zero")
        a, b = self.lo, self.hi
        lo = np.minimum(np.minimum(div_dir(a, c, False), div_dir(a, d, False)),
                        np.minimum(div_dir(b, c, False), div_dir(b, d, False)))
        hi = np.maximum(np.maximum(div_dir(a, c, True), div_dir(a, d, True)),
                        np.maximum(div_dir(b, c, True), div_dir(b, d, True)))
        return IArray(lo, hi)

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __abs__(self):
        lo = np.where(self.lo >= 0, self.lo, np.where(self.hi <= 0, -self.hi, 0.0))
        hi = np.maximum(np.abs(self.lo), np.abs(self.hi))
        return IArray(lo, hi)

    def abs(self):
        return abs(self)

    def sqrt(self):
        if np.any(self.lo < 0):
            raise DomainError("sqrt of negative interval")
        return IArray(sqrt_dir(self.lo, False), sqrt_dir(self.hi, True))

    def exp(self):
        return IArray(exp_dir(self.lo, False), exp_dir(self.hi, True))

    def log(self):
        if np.any(self.lo < 0):
            raise DomainError("log of negative interval")
        return IArray(log_dir(self.lo, False), log_dir(self.hi, True))

    def pow(self, exponent):
        p = to_fraction(exponent)
        if p.denominator == 1:
            return self._ipow(p.numerator)
        if np.any(self.lo < 0):
            raise DomainError(f"negative base with fractional exponent {p}")
        pi = Interval(p)
        if p > 0:
            return IArray(_rpow(self.lo, pi, False), _rpow(self.hi, pi, True))
        return IArray(_rpow(self.hi, pi, False), _rpow(self.lo, pi, True))

    __pow__ = pow

    def _ipow(self, n):
        if n == 0:
            return IArray(np.ones_like(self.lo))
        if n < 0:
            return 1.0 / self._ipow(-n)
        if n == 1:
            return self
        if n % 2:
            return IArray(_npow(self.lo, n, False), _npow(self.hi, n, True))
        return IArray(_upow(self.mig(), n, False), _upow(self.mag(), n, True))

    def intersect(self, other):
        """Elementwise intersection; empty results collapse onto the nearest
        endpoint of ``other`` (callers use this to clamp into a domain)."""
        o = _coerce(other)
        lo = np.maximum(self.lo, o.lo)
        hi = np.minimum(self.hi, o.hi)
        empty = lo > hi
        if np.any(empty):
            below = self.hi < o.lo
            lo = np.where(empty & below, o.lo, np.where(empty, o.hi, lo))
            hi = np.where(empty & below, o.lo, np.where(empty, o.hi, hi))
        return IArray(lo, hi)

    def hull(self, other):
        o = _coerce(other)
        return IArray(np.minimum(self.lo, o.lo), np.maximum(self.hi, o.hi))

    def contains(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (self.lo <= values) & (values <= self.hi)


def _coerce(other):
    if isinstance(other, IArray):
        return other
    if isinstance(other, Interval):
        return IArray(np.float64(other.lo), np.float64(other.hi))
    if isinstance(other, (int, float, Fraction, str)):
        iv = Interval(other)
        return IArray(np.float64(iv.lo), np.float64(iv.hi))
    return None


def _upow(x, n, upward):
    result = np.ones_like(x)
    base = x
    while n:
        if n & 1:
            result = mul_dir(result, base, upward)
        n >>= 1
        if n:
            base = mul_dir(base, base, upward)
    return result


def _npow(x, n, upward):
    pos = _upow(np.abs(x), n, upward)
    neg = -_upow(np.abs(x), n, not upward)
    return np.where(x >= 0, pos, neg)


def _rpow(x, p: Interval, upward):
    with np.errstate(divide="ignore"):
        lg_lo = log_dir(x, False)
        lg_hi = log_dir(x, True)
    lg = IArray(lg_lo, lg_hi) * p
    y = exp_dir(lg.hi if upward else lg.lo, upward)
    zero_val = 0.0 if p.lo > 0 else _INF
    inf_val = _INF if p.lo > 0 else 0.0
    y = np.where(x == 0.0, zero_val, y)
    y = np.where(x == 1.0, 1.0, y)
    y = np.where(np.isinf(x), inf_val, y)
    if not upward:
        y = np.maximum(y, 0.0)
    return y
