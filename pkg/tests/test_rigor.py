"""Interval arithmetic, the expression language and second-order jets."""
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ulamcert.errors import DomainError, NonSmoothError, ParseError
from ulamcert.rigor import (IArray, Interval, eval_jet, evaluate, interval_arith,
                            interval_elementary, parse_expr, substitute, unparse)
from ulamcert.rigor import rounding as R
from ulamcert.rigor.expr import count_binary


def exact(iv: Interval):
    return Fraction(iv.lo), Fraction(iv.hi)


def encloses(iv: Interval, q: Fraction) -> bool:
    lo, hi = exact(iv)
    return lo <= q <= hi


# -- examples ---------------------------------------------------------------------

def test_add_exact_endpoints():
    assert interval_arith(Interval(1, 2), Interval(3, 4), "add") == Interval(4, 6)


def test_mul_sign_cases():
    assert interval_arith(Interval(-1, 2), Interval(3, 4), "mul") == Interval(-4, 8)


def test_decimal_sum_encloses_three_tenths():
    r = interval_arith(Interval.parse("0.1"), Interval.parse("0.2"), "add")
    assert encloses(r, Fraction(3, 10))
    assert r.hi - r.lo <= 2 * math.ulp(0.3)


def test_division_by_zero_interval():
    with pytest.raises(DomainError):
        interval_arith(Interval(1), Interval(-1, 1), "div")


def test_abs_straddling():
    assert interval_elementary(Interval(-3, 2), "abs") == Interval(0, 3)


def test_pow_half_of_squares():
    r = interval_elementary(Interval(4, 9), "pow", Fraction(1, 2))
    assert r.lo <= 2 and r.hi >= 3


def test_pow_fixed_endpoints():
    r = interval_elementary(Interval(0, 1), "pow", Fraction(57, 64))
    assert r.lo == 0.0 and r.hi >= 1.0 and r.hi <= 1.0 + 4e-16


def test_pow_negative_base_fractional():
    with pytest.raises(DomainError):
        interval_elementary(Interval(-1, 1), "pow", Fraction(1, 3))


def test_sqrt_directed():
    r = Interval(2).sqrt()
    assert Fraction(r.lo) ** 2 <= 2 <= Fraction(r.hi) ** 2


def test_rounding_helpers_bracket():
    a, b = 0.1, 0.7
    q = Fraction(a) * Fraction(b)
    assert Fraction(R.mul_down(a, b)) <= q <= Fraction(R.mul_up(a, b))
    q = Fraction(a) / Fraction(b)
    assert Fraction(R.div_down(a, b)) <= q <= Fraction(R.div_up(a, b))
    assert R.exp_down(1.0) <= math.e <= R.exp_up(1.0)


# -- parser ----------------------------------------------------------------------------

def test_parse_top_chain():
    e = parse_expr("2*x + 0.5*x*(1-x)")
    assert count_binary(e) >= 4


def test_parse_lorenz_branch():
    e = parse_expr("(109/64)*abs(x-1/2)^(57/64)")
    v = evaluate(e, Interval(Fraction(3, 4)))
    ref = 109 / 64 * 0.25 ** (57 / 64)
    assert v.lo <= ref <= v.hi


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_expr("2*x + ")
    assert info.value.position == 7


@pytest.mark.parametrize("text", ["y + 1", "sin(x)", "2**x", "(x", "x ^ x"])
def test_parse_rejects(text):
    with pytest.raises(ParseError):
        parse_expr(text)


def test_unary_minus_binds_looser_than_pow():
    v = evaluate(parse_expr("-x^2"), Interval(3))
    assert v == Interval(-9)


def test_precedence():
    v = evaluate(parse_expr("1 + 2*3 - 8/4"), Interval(0))
    assert v == Interval(5)


@pytest.mark.parametrize("text", ["2*x + 0.5*x*(1-x)", "(109/64)*abs(x-1/2)^(57/64)",
                                  "1-(109/64)*abs(x-1/2)^(57/64)", "-x^2 - -x", "23/5*x - 3",
                                  "x/(1+x)/2", "abs(-x)^(3/2)"])
def test_unparse_round_trip(text):
    e = parse_expr(text)
    once = unparse(e)
    assert parse_expr(once) == e
    assert unparse(parse_expr(once)) == once


# -- jets ------------------------------------------------------------------------------

def test_jet_lanford_point():
    j = eval_jet(parse_expr("2*x+0.5*x*(1-x)"), Interval(Fraction(1, 4)))
    assert j.val.contains(Fraction(19, 32))
    assert j.d1.contains(Fraction(9, 4))
    assert j.d2.contains(-1)


def test_identity_and_constant_jets():
    x = Interval(0.2, 0.3)
    j = eval_jet(parse_expr("x"), x)
    assert j.val == x and j.d1 == Interval(1) and j.d2 == Interval(0)
    j = eval_jet(parse_expr("7/3"), x)
    assert j.val.contains(Fraction(7, 3)) and j.d1 == Interval(0) and j.d2 == Interval(0)


def test_jet_strict_kink():
    with pytest.raises(NonSmoothError):
        eval_jet(parse_expr("abs(x-1/2)"), Interval(0.4, 0.6))
    j = eval_jet(parse_expr("abs(x-1/2)"), Interval(0.4, 0.6), strict=False)
    assert j.d1.contains(-1) and j.d1.contains(1)


def test_jet_on_iarray_matches_scalar():
    e = parse_expr("(109/64)*abs(x-1/2)^(57/64)")
    xs = np.linspace(0.55, 0.95, 9)
    ja = eval_jet(e, IArray(xs, xs))
    for i, x in enumerate(xs):
        js = eval_jet(e, Interval(float(x)))
        assert ja.d1[i].overlaps(js.d1)


# -- properties ----------------------------------------------------------------------

rationals = st.fractions(min_value=-1000, max_value=1000, max_denominator=10 ** 6)


def _iv_of(a: Fraction, b: Fraction):
    lo, hi = min(a, b), max(a, b)
    return Interval(lo, hi), lo, hi


@given(rationals, rationals, rationals, rationals, st.sampled_from(["add", "sub", "mul", "div"]),
       st.floats(0, 1))
def test_containment_property(a, b, c, d, op, t):
    x, xlo, xhi = _iv_of(a, b)
    y, ylo, yhi = _iv_of(c, d)
    if op == "div" and ylo <= 0 <= yhi:
        return
    p = xlo + (xhi - xlo) * Fraction(t)
    q = ylo + (yhi - ylo) * Fraction(1 - t)
    exact_val = {"add": p + q, "sub": p - q, "mul": p * q, "div": p / q if q else None}[op]
    assert encloses(interval_arith(x, y, op), exact_val)


@given(rationals, rationals, st.floats(0, 1), st.floats(0, 10))
def test_isotonicity(a, b, t, grow):
    x, lo, hi = _iv_of(a, b)
    wide = Interval(lo - Fraction(grow), hi + Fraction(grow))
    e = parse_expr("x*x - 3*x + abs(x)/2")
    small, big = evaluate(e, x), evaluate(e, wide)
    assert big.lo <= small.lo and small.hi <= big.hi


inner_texts = ["x*x", "0.5*x + 1/3", "abs(x - 1/2) + 2", "x/(2 + x*x)", "(x+1)^3", "(1+x*x)^(1/2)"]
outer_texts = ["2*x + 0.5*x*(1-x)", "x^2 - x", "(x+3)^(2/3)", "1/(1 + x*x)", "-x + x*x*x"]


@given(st.sampled_from(outer_texts), st.sampled_from(inner_texts),
       st.fractions(min_value=0, max_value=1, max_denominator=1000))
def test_jet_chain_rule(outer, inner, x):
    f, g = parse_expr(outer), parse_expr(inner)
    xi = Interval(x)
    jg = eval_jet(g, xi)
    jf = eval_jet(f, jg.val)
    composed = eval_jet(substitute(f, g), xi)
    d1 = jf.d1 * jg.d1
    d2 = jf.d2 * jg.d1 * jg.d1 + jf.d1 * jg.d2
    assert composed.val.overlaps(jf.val)
    assert composed.d1.overlaps(d1)
    assert composed.d2.overlaps(d2)


def test_random_containment_mixed_ops():
    rng = random.Random(1)
    for _ in range(2000):
        p = Fraction(rng.randint(-10 ** 6, 10 ** 6), rng.randint(1, 10 ** 6))
        q = Fraction(rng.randint(1, 10 ** 6), rng.randint(1, 10 ** 6))
        x, y = Interval(p), Interval(q)
        assert encloses(x * y + x / y - y, p * q + p / q - q)
