"""Piecewise maps, iterates, branch inverses and distortion integrals."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ulamcert.dynamics import (Hole, branch_preimage, build_map, distortion_excess_integral,
                               distortion_sup, iterate_map, linear_mod1, mod1_map)
from ulamcert.errors import ConfigError, EmptyPreimage, NotExpandingError
from ulamcert.rigor import Interval

LORENZ = [((0, "1/2"), "(109/64)*abs(x-1/2)^(57/64)"),
          (("1/2", 1), "1-(109/64)*abs(x-1/2)^(57/64)")]


def test_linear_235(map235):
    assert map235.n_branches == 5
    assert map235.inf_abs_deriv.contains(Fraction(23, 5))
    assert map235.min_gap.contains(Fraction(3, 23))
    assert not map235.unbounded_derivative


def test_lanford_inf_derivative(lanford):
    assert lanford.n_branches == 2
    lo = lanford.inf_abs_deriv.lo
    assert 1.5 - 1e-6 <= lo <= 1.5


def test_identity_builds():
    m = build_map([((0, 1), "x")])
    assert m.inf_abs_deriv.contains(1)


def test_vanishing_derivative():
    with pytest.raises(NotExpandingError):
        build_map([((0, 1), "x*x")])


def test_overlap_and_gap():
    with pytest.raises(ConfigError):
        build_map([((0, "0.6"), "2*x"), (("0.5", 1), "2*x-1")])
    with pytest.raises(ConfigError):
        build_map([((0, "0.4"), "2*x"), (("0.5", 1), "2*x-1")])
    with pytest.raises(ConfigError):
        build_map([((0, "0.5"), "3*x")])


def test_image_outside_unit():
    with pytest.raises(ConfigError):
        build_map([((0, 1), "2*x")])


def test_lorenz_flags_unbounded():
    m = build_map(LORENZ)
    assert m.unbounded_derivative
    assert m.n_branches == 2


def test_iterate_lanford(lanford, lanford2):
    assert lanford2.n_branches == 4
    assert lanford2.inf_abs_deriv.lo >= 2.25 * (1 - 1e-12)
    cut = lanford.cut_points[1]
    assert cut.contains(0.5 * (5 - math.sqrt(17))) or cut.overlaps(Interval((5 - math.sqrt(17)) / 2))


def test_iterate_identity(lanford):
    assert iterate_map(lanford, 1) is lanford


def test_iterate_doubling(doubling):
    m = iterate_map(doubling, 2)
    assert m.n_branches == 4
    assert m.inf_abs_deriv.contains(4)
    for i, b in enumerate(m.branches):
        assert b.left.contains(Fraction(i, 4)) and b.right.contains(Fraction(i + 1, 4))


def test_preimage_linear(map235):
    enc = branch_preimage(map235.branches[0], Interval(0, Fraction(1, 10)))
    assert enc.contains(0) and enc.contains(Fraction(1, 46))
    assert enc.hi - 1 / 46 < 1e-15


def test_preimage_full_branch(doubling):
    enc = branch_preimage(doubling.branches[0], Interval(0, 1))
    assert enc.contains(0) and enc.contains(0.5)


def test_preimage_lanford_point(lanford):
    b = lanford.branches[0]
    enc = branch_preimage(b, Interval(0.25))
    # bisection oracle on the exact polynomial
    lo, hi = 0.0, 0.5
    for _ in range(60):
        m = 0.5 * (lo + hi)
        if 2 * m + 0.5 * m * (1 - m) < 0.25:
            lo = m
        else:
            hi = m
    assert enc.lo <= hi and lo <= enc.hi
    assert enc.width < 1e-12


def test_preimage_empty(map235):
    last = map235.branches[-1]
    with pytest.raises(EmptyPreimage):
        branch_preimage(last, Interval(0.7, 0.9))


def test_hole_validation():
    h = Hole.of("7/16", "9/16")
    assert h.exact
    assert not Hole.of("1/3", "2/3").exact
    with pytest.raises(ConfigError):
        Hole.of("0.5", "1.5")
    with pytest.raises(ConfigError):
        Hole.of("0.6", "0.5")


@pytest.mark.parametrize("m_name", ["lanford", "lanford2", "map235", "doubling"])
def test_branch_cover(m_name, request):
    m = request.getfixturevalue(m_name)
    bs = m.branches
    assert bs[0].left.contains(0) and bs[-1].right.contains(1)
    for p, q in zip(bs, bs[1:]):
        assert p.right.overlaps(q.left)
        assert p.left.hi < q.right.lo


@settings(max_examples=40)
@given(st.floats(0.01, 0.99))
def test_preimage_soundness(t):
    m = _lanford_cached()
    for b in m.branches:
        try:
            enc = branch_preimage(b, Interval(t))
        except EmptyPreimage:
            continue
        y = float(b.evaluate_float(np.array([enc.mid]))[0])
        assert abs(y - t) < 1e-12


_CACHE = {}


def _lanford_cached():
    if "m" not in _CACHE:
        _CACHE["m"] = mod1_map("2*x + 0.5*x*(1-x)")
    return _CACHE["m"]


def test_iterate_derivative_invariant(map235):
    m2 = iterate_map(map235, 2)
    assert m2.inf_abs_deriv.lo >= map235.inf_abs_deriv.lo ** 2 * (1 - 1e-15)
    assert m2.n_branches == 4 * 5 + 3   # last image [0, 0.6] meets three branches


def test_affine_integral_zero(map235):
    integral, below = distortion_excess_integral(map235, 1.0)
    assert integral == Interval(0.0)
    assert below.hi == 0.0


def test_distortion_sup_lanford(lanford):
    # |T''/T'^2| = 1/(2.5 - x)^2 peaks at x = 1
    assert abs(distortion_sup(lanford) - 1 / 1.5 ** 2) < 1e-6
    assert distortion_sup(lanford) >= 1 / 1.5 ** 2


@pytest.mark.parametrize("l", [1.0, 10.0, 300.0])
def test_lorenz_integral_matches_closed_form(l):
    # one side: D = (alpha-1)/(theta alpha) u^-alpha; the excess set is u < u_l
    theta, alpha = 109 / 64, 57 / 64
    u_l = ((1 - alpha) / (theta * alpha * l)) ** (1 / alpha)
    u = min(u_l, 0.5)
    oracle = 2 * u ** (1 - alpha) / (theta * alpha)
    integral, below = distortion_excess_integral(build_map(LORENZ), l)
    assert integral.lo <= oracle * (1 + 1e-9) and oracle * (1 - 1e-9) <= integral.hi
    assert below.hi <= l


def test_lorenz_integral_riemann_oracle():
    # 10^6-node midpoint sum on the excess set plus the analytic tail near 1/2
    theta, alpha, l = 109 / 64, 57 / 64, 50.0
    c = (1 - alpha) / (theta * alpha)
    u_l = (c / l) ** (1 / alpha)
    eps = u_l * 1e-3
    n = 10 ** 6
    h = (u_l - eps) / n
    u = eps + h * (np.arange(n) + 0.5)
    riemann = np.sum(c * u ** -alpha) * h
    tail = eps ** (1 - alpha) / (theta * alpha)
    oracle = 2 * (riemann + tail)
    integral, _ = distortion_excess_integral(build_map(LORENZ), l)
    assert integral.lo <= oracle * (1 + 1e-6) and oracle * (1 - 1e-6) <= integral.hi
