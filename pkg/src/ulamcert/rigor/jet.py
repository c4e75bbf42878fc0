"""Second-order forward differentiation over interval arguments."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import DomainError, NonSmoothError
from .expr import Abs, BinOp, Expr, Neg, Num, Pow, Var, _const
from .iarray import IArray
from .interval import Interval


@dataclass(frozen=True)
class Jet2:
    """Enclosures of value, first and second derivative over an argument set."""
    val: object
    d1: object
    d2: object

    def compose(self, inner: "Jet2") -> "Jet2":
        """Jet of ``self ∘ inner`` where ``self`` was evaluated at ``inner.val``."""
        d1 = self.d1 * inner.d1
        d2 = self.d2 * inner.d1.pow(2) + self.d1 * inner.d2
        return Jet2(self.val, d1, d2)


def _zero(like):
    if isinstance(like, IArray):
        return IArray(np.zeros_like(like.lo))
    return Interval(0.0)


def _one(like):
    if isinstance(like, IArray):
        return IArray(np.ones_like(like.lo))
    return Interval(1.0)


def identity_jet(x):
    return Jet2(x, _one(x), _zero(x))


def eval_jet(e: Expr, x, strict: bool = True) -> Jet2:
    """Jet of ``e`` at the interval (or interval array) ``x``.

    With ``strict`` a kink of ``abs`` strictly inside the argument raises
    :class:`NonSmoothError`; otherwise the two one-sided jets are hulled.
    A fractional power whose base touches 0 gives infinite derivative
    enclosures rather than an error.
    """
    if isinstance(e, Var):
        return identity_jet(x)
    if isinstance(e, Num):
        c = _const(e.value, x)
        z = _zero(x)
        return Jet2(c + z if isinstance(x, IArray) else c, z, z)
    if isinstance(e, Neg):
        j = eval_jet(e.arg, x, strict)
        return Jet2(-j.val, -j.d1, -j.d2)
    if isinstance(e, BinOp):
        u = eval_jet(e.left, x, strict)
        v = eval_jet(e.right, x, strict)
        op = e.op
        if op == "+":
            return Jet2(u.val + v.val, u.d1 + v.d1, u.d2 + v.d2)
        if op == "-":
            return Jet2(u.val - v.val, u.d1 - v.d1, u.d2 - v.d2)
        if op == "*":
            return Jet2(u.val * v.val,
                        u.d1 * v.val + u.val * v.d1,
                        u.d2 * v.val + 2 * (u.d1 * v.d1) + u.val * v.d2)
        q = u.val / v.val
        q1 = (u.d1 - q * v.d1) / v.val
        q2 = (u.d2 - 2 * (q1 * v.d1) - q * v.d2) / v.val
        return Jet2(q, q1, q2)
    if isinstance(e, Abs):
        return _abs_jet(eval_jet(e.arg, x, strict), strict)
    if isinstance(e, Pow):
        return _pow_jet(eval_jet(e.base, x, strict), e.exponent, strict)
    raise TypeError(e)


def _abs_jet(u: Jet2, strict: bool) -> Jet2:
    v = u.val
    if isinstance(v, IArray):
        neg = v.hi <= 0
        straddle = (v.lo < 0) & (v.hi > 0)
        if strict and np.any(straddle):
            raise NonSmoothError("abs kink inside the argument")
        sign = IArray(np.where(neg, -1.0, 1.0))
        d1 = u.d1 * sign
        d2 = u.d2 * sign
        if np.any(straddle):
            d1h = d1.hull(-d1)
            d2h = d2.hull(-d2)
            d1 = IArray(np.where(straddle, d1h.lo, d1.lo), np.where(straddle, d1h.hi, d1.hi))
            d2 = IArray(np.where(straddle, d2h.lo, d2.lo), np.where(straddle, d2h.hi, d2.hi))
        return Jet2(abs(v), d1, d2)
    if v.lo >= 0:
        return u
    if v.hi <= 0:
        return Jet2(-v, -u.d1, -u.d2)
    if strict:
        raise NonSmoothError(f"abs kink inside the argument {v!r}")
    return Jet2(abs(v), u.d1.hull(-u.d1), u.d2.hull(-u.d2))


def _pow_jet(u: Jet2, p: Fraction, strict: bool) -> Jet2:
    if p == 0:
        one = _one(u.val)
        z = _zero(u.val)
        return Jet2(one, z, z)
    if p == 1:
        return u
    if p.denominator != 1:
        lo = u.val.lo
        if np.any(np.asarray(lo) < 0):
            raise DomainError(f"negative base with fractional exponent {p}")
    val = u.val.pow(p)
    pm1 = u.val.pow(p - 1)
    if p.denominator == 1 and p == 2:
        pm2 = _one(u.val)
    else:
        pm2 = u.val.pow(p - 2)
    pi = Interval(p)
    d1 = pi * (pm1 * u.d1)
    d2 = (pi * Interval(p - 1)) * (pm2 * u.d1.pow(2)) + pi * (pm1 * u.d2)
    return Jet2(val, d1, d2)
