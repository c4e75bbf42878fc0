"""Directed rounding on IEEE doubles without touching the FPU control word.

Every operation is evaluated in the default round-to-nearest mode.  For
``+``, ``-`` and ``*`` the exact rounding error is recovered with an
error-free transformation (TwoSum, Dekker's TwoProduct) and the result is
stepped one ulp outward only when the rounded value lies on the wrong side
of the exact one.  Division and square root recover the sign of the
residual the same way.  ``exp`` and ``log`` come from libm, which is
faithful but not correctly rounded, so those are always widened by two ulps.

Near the overflow and underflow thresholds the transformations are not
exact; there the result is simply widened by one ulp on the requested side,
which is still sound because the round-to-nearest result is within half an
ulp of the exact value.

The vectorised twins in :mod:`ulamcert.rigor.iarray` implement the same
rules on numpy arrays, so scalar and array evaluations agree bit for bit.
"""

import math
import sys

INF = math.inf
MAX = sys.float_info.max
UNIT_ROUNDOFF = 2.0 ** -53

_SPLIT = 134217729.0  # 2**27 + 1
_TINY = 2.0 ** -960
_HUGE = 2.0 ** 990
_LIBM_ULPS = 2


def down(x):
    return math.nextafter(x, -INF)


def up(x):
    return math.nextafter(x, INF)


def _two_prod_err(a, b, p):
    c = _SPLIT * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLIT * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def add_down(a, b):
    s = a + b
    if s != s or math.isinf(s):
        if s > 0 and math.isfinite(a) and math.isfinite(b):
            return MAX
        return s
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return down(s) if e < 0 else s


def add_up(a, b):
    s = a + b
    if s != s or math.isinf(s):
        if s < 0 and math.isfinite(a) and math.isfinite(b):
            return -MAX
        return s
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return up(s) if e > 0 else s


def sub_down(a, b):
    return add_down(a, -b)


def sub_up(a, b):
    return add_up(a, -b)


def _mul(a, b, upward):
    if a == 0.0 or b == 0.0:
        # 0 * inf is taken as 0: interval endpoints at infinity stand for
        # unbounded sets, and the exact factor 0 annihilates them.
        return 0.0
    p = a * b
    if math.isinf(p):
        if math.isfinite(a) and math.isfinite(b):
            if upward:
                return p if p > 0 else -MAX
            return p if p < 0 else MAX
        return p
    if abs(p) < _TINY or abs(a) > _HUGE or abs(b) > _HUGE:
        return up(p) if upward else down(p)
    e = _two_prod_err(a, b, p)
    if upward:
        return up(p) if e > 0 else p
    return down(p) if e < 0 else p


def mul_down(a, b):
    return _mul(a, b, False)


def mul_up(a, b):
    return _mul(a, b, True)


def _div(a, b, upward):
    if a == 0.0:
        return 0.0
    if math.isinf(b):
        if math.isinf(a):
            raise ArithmeticError("inf / inf")
        return 0.0
    q = a / b
    if math.isinf(a):
        return q
    if math.isinf(q) or q == 0.0 or abs(q) < _TINY or abs(q) > _HUGE \
            or abs(a) < _TINY or abs(b) > _HUGE:
        return up(q) if upward else down(q)
    p = q * b
    e = _two_prod_err(q, b, p)
    r = (p - a) + e   # sign of q*b - a
    if r == 0.0:
        return q
    over = (r > 0) == (b > 0)
    if upward:
        return q if over else up(q)
    return down(q) if over else q


def div_down(a, b):
    return _div(a, b, False)


def div_up(a, b):
    return _div(a, b, True)


def _sqrt(x, upward):
    if x == 0.0 or math.isinf(x):
        return x
    s = math.sqrt(x)
    if x < _TINY or x > _HUGE:
        return up(s) if upward else down(s)
    p = s * s
    r = (p - x) + _two_prod_err(s, s, p)
    if r == 0.0:
        return s
    over = r > 0
    if upward:
        return s if over else up(s)
    return down(s) if over else s


def sqrt_down(x):
    return max(_sqrt(x, False), 0.0)


def sqrt_up(x):
    return _sqrt(x, True)


def _widen(y, n, upward):
    for _ in range(n):
        y = up(y) if upward else down(y)
    return y


def exp_down(x):
    if x == 0.0:
        return 1.0
    if x == -INF:
        return 0.0
    try:
        y = math.exp(x)
    except OverflowError:
        return MAX
    return max(_widen(y, _LIBM_ULPS, False), 0.0)


def exp_up(x):
    if x == 0.0:
        return 1.0
    if x == -INF:
        return 0.0
    try:
        y = math.exp(x)
    except OverflowError:
        return INF
    return _widen(y, _LIBM_ULPS, True)


def log_down(x):
    if x == 1.0:
        return 0.0
    if x == 0.0:
        return -INF
    if math.isinf(x):
        return MAX
    return _widen(math.log(x), _LIBM_ULPS, False)


def log_up(x):
    if x == 1.0:
        return 0.0
    if x == 0.0:
        return -INF
    if math.isinf(x):
        return INF
    return _widen(math.log(x), _LIBM_ULPS, True)


def sum_up(values):
    """Upper bound of an exact sum, accumulated left to right."""
    s = 0.0
    for v in values:
        s = add_up(s, v)
    return s


def sum_down(values):
    s = 0.0
    for v in values:
        s = add_down(s, v)
    return s


def gamma(n):
    """Upper bound on n*u/(1-n*u), the classical summation error factor."""
    nu = mul_up(float(n), UNIT_ROUNDOFF)
    return div_up(nu, sub_down(1.0, nu))
