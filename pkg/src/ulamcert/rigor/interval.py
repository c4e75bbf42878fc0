"""Closed real intervals with outward-rounded double endpoints.

``Interval`` is an immutable ``(lo, hi)`` pair.  Endpoints may be infinite,
which is how unbounded derivative enclosures near a singular point are
carried; ``0 * inf`` is taken to be ``0``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from ..errors import DomainError
from . import rounding as R

__all__ = ["Interval", "to_fraction"]


def to_fraction(value) -> Fraction:
    """Exact rational value of an int, float, Fraction or literal string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, float, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip().replace(" ", "")
        if "^" in text:
            base, _, exp = text.partition("^")
            return Fraction(base) ** int(exp)
        return Fraction(text)
    raise TypeError(f"cannot convert {value!r} to a rational")


def _enclose_fraction(q: Fraction):
    f = float(q)   # correctly rounded
    if math.isinf(f):
        return (R.MAX, R.INF) if f > 0 else (-R.INF, -R.MAX)
    exact = Fraction(f)
    if exact == q:
        return f, f
    if exact < q:
        return f, R.up(f)
    return R.down(f), f


class Interval(tuple):
    """Interval ``[lo, hi]``.

    ``Interval(a)`` encloses a single number (int, float, Fraction or a
    decimal / ``p/q`` string) as tightly as possible; ``Interval(a, b)``
    encloses ``[a, b]`` with each endpoint rounded outward.
    """

    __slots__ = ()

    def __new__(cls, lo, hi=None):
        if isinstance(lo, Interval) and hi is None:
            return lo
        if hi is None:
            if isinstance(lo, float):
                if lo != lo:
                    raise DomainError("NaN endpoint")
                return tuple.__new__(cls, (lo, lo))
            return tuple.__new__(cls, _enclose_fraction(to_fraction(lo)))
        a = lo.lo if isinstance(lo, Interval) else _lower(lo)
        b = hi.hi if isinstance(hi, Interval) else _upper(hi)
        if a != a or b != b:
            raise DomainError("NaN endpoint")
        if a > b:
            raise DomainError(f"empty interval [{a!r}, {b!r}]")
        return tuple.__new__(cls, (a, b))

    # -- construction ----------------------------------------------------
    @classmethod
    def parse(cls, text: str) -> "Interval":
        return cls(text)

    @classmethod
    def hull_of(cls, items) -> "Interval":
        items = list(items)
        return _mk(min(i.lo for i in items), max(i.hi for i in items))

    @property
    def lo(self) -> float:
        return tuple.__getitem__(self, 0)

    @property
    def hi(self) -> float:
        return tuple.__getitem__(self, 1)

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    # -- set queries ------------------------------------------------------
    @property
    def mid(self) -> float:
        if math.isinf(self.lo) or math.isinf(self.hi):
            if self.lo == -self.hi:
                return 0.0
            return self.lo if math.isinf(self.hi) else self.hi
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def width(self) -> float:
        return R.sub_up(self.hi, self.lo)

    @property
    def rad(self) -> float:
        m = self.mid
        return max(R.sub_up(self.hi, m), R.sub_up(m, self.lo))

    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def mig(self) -> float:
        if self.lo > 0:
            return self.lo
        if self.hi < 0:
            return -self.hi
        return 0.0

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, value) -> bool:
        if isinstance(value, Interval):
            return self.lo <= value.lo and value.hi <= self.hi
        if isinstance(value, float):
            return self.lo <= value <= self.hi
        q = to_fraction(value)
        return self.lo <= q <= self.hi

    __contains__ = contains

    def overlaps(self, other) -> bool:
        other = Interval(other)
        return self.lo <= other.hi and other.lo <= self.hi

    def hull(self, other) -> "Interval":
        other = Interval(other)
        return _mk(min(self.lo, other.lo), max(self.hi, other.hi))

    __or__ = hull

    def intersect(self, other):
        """Intersection, or ``None`` when empty."""
        other = Interval(other)
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return _mk(lo, hi)

    __and__ = intersect

    def certainly_lt(self, other) -> bool:
        return self.hi < Interval(other).lo

    def certainly_le(self, other) -> bool:
        return self.hi <= Interval(other).lo

    # -- arithmetic -------------------------------------------------------
    def __neg__(self):
        return _mk(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mk(R.add_down(self.lo, o.lo), R.add_up(self.hi, o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return _mk(R.sub_down(self.lo, o.hi), R.sub_up(self.hi, o.lo))

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
        if a >= 0 and c >= 0:
            return _mk(R.mul_down(a, c), R.mul_up(b, d))
        lo = min(R.mul_down(a, c), R.mul_down(a, d), R.mul_down(b, c), R.mul_down(b, d))
        hi = max(R.mul_up(a, c), R.mul_up(a, d), R.mul_up(b, c), R.mul_up(b, d))
        return _mk(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        c, d = o.lo, o.hi
        if c <= 0 <= d:
            raise DomainError(f"division by an interval containing zero: {o!r}")
        a, b = self.lo, self.hi
        lo = min(R.div_down(a, c), R.div_down(a, d), R.div_down(b, c), R.div_down(b, d))
        hi = max(R.div_up(a, c), R.div_up(a, d), R.div_up(b, c), R.div_up(b, d))
        return _mk(lo, hi)

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return _mk(0.0, max(-self.lo, self.hi))

    def abs(self):
        return abs(self)

    def square(self):
        return self.pow(2)

    def sqrt(self):
        if self.lo < 0:
            raise DomainError(f"sqrt of {self!r}")
        return _mk(R.sqrt_down(self.lo), R.sqrt_up(self.hi))

    def exp(self):
        return _mk(R.exp_down(self.lo), R.exp_up(self.hi))

    def log(self):
        if self.lo < 0:
            raise DomainError(f"log of {self!r}")
        return _mk(R.log_down(self.lo), R.log_up(self.hi))

    def pow(self, exponent):
        """``self ** exponent`` for a rational exponent.

        Integer exponents use repeated squaring on the endpoints; other
        exponents go through ``exp(p * log(x))`` and need ``lo >= 0``.
        """
        p = to_fraction(exponent)
        if p.denominator == 1:
            return self._ipow(p.numerator)
        if self.lo < 0:
            raise DomainError(f"negative base {self!r} with fractional exponent {p}")
        pi = Interval(p)
        if p > 0:
            return _mk(_rpow_down(self.lo, pi), _rpow_up(self.hi, pi))
        return _mk(_rpow_down(self.hi, pi), _rpow_up(self.lo, pi))

    __pow__ = pow

    def _ipow(self, n: int):
        if n == 0:
            return _mk(1.0, 1.0)
        if n < 0:
            return Interval(1.0) / self._ipow(-n)
        if n == 1:
            return self
        a, b = self.lo, self.hi
        if n % 2 == 1:
            lo = _npow(a, n, False)
            hi = _npow(b, n, True)
            return _mk(lo, hi)
        lo = _upow(self.mig(), n, False)
        hi = _upow(self.mag(), n, True)
        return _mk(lo, hi)

    # -- convenience ------------------------------------------------------
    def to_fraction_pair(self):
        return Fraction(self.lo), Fraction(self.hi)

    def as_strings(self):
        return [repr(self.lo), repr(self.hi)]


def _mk(lo, hi):
    return tuple.__new__(Interval, (lo, hi))


def _lower(v):
    if isinstance(v, float):
        return v
    return _enclose_fraction(to_fraction(v))[0]


def _upper(v):
    if isinstance(v, float):
        return v
    return _enclose_fraction(to_fraction(v))[1]


def _coerce(other):
    if isinstance(other, Interval):
        return other
    if isinstance(other, (int, float, Fraction, str)):
        return Interval(other)
    return None


def _upow(x, n, upward):
    """x**n for x >= 0 by repeated squaring, rounded in one direction."""
    mul = R.mul_up if upward else R.mul_down
    result = 1.0
    base = x
    while n:
        if n & 1:
            result = mul(result, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return result


def _npow(x, n, upward):
    """x**n for odd n and any sign of x."""
    if x >= 0:
        return _upow(x, n, upward)
    return -_upow(-x, n, not upward)


def _rpow_down(x, p: Interval):
    if x == 0.0:
        return 0.0 if p.lo > 0 else R.INF
    if x == 1.0:
        return 1.0
    if math.isinf(x):
        return R.INF if p.lo > 0 else 0.0
    lg = _mk(R.log_down(x), R.log_up(x))
    return max(R.exp_down((lg * p).lo), 0.0)


def _rpow_up(x, p: Interval):
    if x == 0.0:
        return 0.0 if p.lo > 0 else R.INF
    if x == 1.0:
        return 1.0
    if math.isinf(x):
        return R.INF if p.lo > 0 else 0.0
    lg = _mk(R.log_down(x), R.log_up(x))
    return R.exp_up((lg * p).hi)
