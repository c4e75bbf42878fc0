"""Piecewise expanding maps of [0, 1], their iterates and certified inverses.

A branch of an iterate F = T^n is stored as the chain of T-branch formulas it
applies, together with the domain hull of the T-branch used at each stage.
Stage inputs are clamped into that hull before evaluation, which keeps
overestimated enclosures inside the region where the formula is valid.

Derivative information is carried as a "distortion jet" (1/F', F''/F'^2)
instead of (F', F'').  It composes as

    1/(g∘h)'        = (1/g')(h) * (1/h')
    D(g∘h)          = D(g)(h) + D(h) * (1/g')(h)

and for power-law stages c0 + c1*|a x + b|^p both components have closed forms
that stay finite (or correctly infinite) at the singular point, where raw
jets of x^p would lose all precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (ConfigError, DomainError, EmptyPreimage, NotExpandingError,
                     PrecisionError)
from .rigor import rounding as R
from .rigor.expr import Expr, compile_float, parse_expr, power_law, substitute, evaluate, X
from .rigor.iarray import IArray, add_dir, div_dir, mul_dir
from .rigor.interval import Interval, to_fraction
from .rigor.jet import eval_jet

DEFAULT_TOL = 2.0 ** -40
_UNIT = Interval(0.0, 1.0)


# -- per-stage evaluation ---------------------------------------------------

@lru_cache(maxsize=None)
def _float_fn(e: Expr):
    return compile_float(e)


@lru_cache(maxsize=None)
def _power_law(e: Expr):
    return power_law(e)


def _as_iarray(x):
    if isinstance(x, IArray):
        return x
    x = Interval(x)
    return IArray(np.array([x.lo]), np.array([x.hi]))


def _entire(mask, a: IArray) -> IArray:
    lo = np.where(mask, -np.inf, a.lo)
    hi = np.where(mask, np.inf, a.hi)
    return IArray(lo, hi)


def _stage_dist(e: Expr, y: IArray, dom: Interval):
    """(value, 1/T', T''/T'^2) of one stage over the interval array ``y``."""
    pl = _power_law(e)
    if pl is not None:
        a, b = Interval(pl.a), Interval(pl.b)
        lin = y * a + b
        s = 1.0
        if pl.absolute:
            # sign of a*x+b is constant on the branch domain
            mid = float(pl.a) * dom.mid + float(pl.b)
            s = -1.0 if mid < 0 else 1.0
            u = abs(lin)
        else:
            u = IArray(np.maximum(lin.lo, 0.0), np.maximum(lin.hi, 0.0))
        p = pl.p
        c1 = Interval(pl.scale)
        val = Interval(pl.offset) + c1 * u.pow(p)
        denom = c1 * Interval(p) * a * Interval(s)
        inv = u.pow(1 - p) / denom
        dist = (Interval(p - 1) / (c1 * Interval(p))) * u.pow(-p)
        return val, inv, dist
    j = eval_jet(e, y, strict=False)
    d1 = j.d1
    bad = (d1.lo <= 0) & (d1.hi >= 0)
    if np.any(bad):
        safe = IArray(np.where(bad, 1.0, d1.lo), np.where(bad, 1.0, d1.hi))
        inv = _entire(bad, 1.0 / safe)
    else:
        inv = 1.0 / d1
    dist = j.d2 * inv.pow(2)
    dist = _entire(bad | np.isnan(dist.lo) | np.isnan(dist.hi), dist)
    return j.val, inv, dist


# -- branches ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Branch:
    """Monotone C^2 piece of a map on the domain (d_i, d_{i+1}).

    ``left``/``right`` enclose the true endpoints; ``chain`` lists the
    T-branch formulas applied in order and ``stage_domains`` their domains.
    """
    left: Interval
    right: Interval
    chain: tuple
    stage_domains: tuple
    increasing: bool
    image: Interval = field(default=_UNIT)

    @property
    def domain(self) -> Interval:
        return Interval(self.left.lo, self.right.hi)

    @property
    def monotonicity(self) -> str:
        return "increasing" if self.increasing else "decreasing"

    @property
    def formula(self) -> Expr:
        e = X
        for stage in self.chain:
            e = substitute(stage, e)
        return e

    def inner(self):
        """Floats certainly inside the true domain (may coincide if tiny)."""
        return self.left.hi, self.right.lo

    # evaluation ---------------------------------------------------------
    def evaluate(self, x):
        scalar = not isinstance(x, IArray)
        y = _as_iarray(x)
        for e, dom in zip(self.chain, self.stage_domains):
            y = evaluate(e, y.intersect(dom))
        return y[0] if scalar else y

    def evaluate_float(self, x):
        y = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            for e, dom in zip(self.chain, self.stage_domains):
                y = _float_fn(e)(np.clip(y, dom.lo, dom.hi))
        return y

    def dist_jet(self, x):
        """(F, 1/F', F''/F'^2) enclosures over ``x`` (Interval or IArray)."""
        scalar = not isinstance(x, IArray)
        y = _as_iarray(x)
        inv = None
        dist = None
        for e, dom in zip(self.chain, self.stage_domains):
            y, inv_g, d_g = _stage_dist(e, y.intersect(dom), dom)
            if inv is None:
                inv, dist = inv_g, d_g
            else:
                dist = d_g + dist * inv_g
                inv = inv * inv_g
        if scalar:
            return y[0], inv[0], dist[0]
        return y, inv, dist

    # inverses -----------------------------------------------------------
    def clipped_roots(self, t_lo, t_hi=None):
        """Enclosures of c(t) = clamp(F^{-1}(t), L, R) for an array of targets.

        Returns ``(lo, hi)`` float arrays.  A float root is located by
        bisection and then bracketed by points whose interval images lie
        certainly on either side of the target.
        """
        t_lo = np.atleast_1d(np.asarray(t_lo, dtype=float))
        t_hi = t_lo if t_hi is None else np.atleast_1d(np.asarray(t_hi, dtype=float))
        n = t_lo.shape[0]
        lo = np.full(n, self.left.lo)
        hi = np.full(n, self.right.hi)
        a0, b0 = self.inner()
        if not a0 < b0:
            return lo, hi
        s = 1.0 if self.increasing else -1.0
        tm = 0.5 * t_lo + 0.5 * t_hi
        a = np.full(n, a0)
        b = np.full(n, b0)
        for _ in range(80):
            m = 0.5 * a + 0.5 * b
            below = s * (self.evaluate_float(m) - tm) < 0
            a = np.where(below, m, a)
            b = np.where(below, b, m)
            if np.all((b - a) <= 2.0 * np.spacing(np.maximum(np.abs(a), np.abs(b)))):
                break
        r = 0.5 * a + 0.5 * b

        def certify(side):
            # side=-1 looks for a lower bound of c(t), side=+1 for an upper one
            out = np.full(n, np.nan)
            pending = np.ones(n, dtype=bool)
            want_below = (side < 0) == (s > 0)
            edge_x = a0 if side < 0 else b0
            eps = np.maximum(np.abs(r), 1e-300) * 2.0 ** -52
            for _ in range(48):
                x = np.clip(r + side * eps, a0, b0)
                fx = self.evaluate(IArray.points(x))
                ok = (fx.hi <= t_lo) if want_below else (fx.lo >= t_hi)
                hit = pending & ok
                out[hit] = x[hit]
                pending &= ~ok & (x != edge_x)
                if not pending.any():
                    break
                eps = eps * 4.0
            return out

        low = certify(-1.0)
        high = certify(1.0)
        lo = np.where(np.isnan(low), lo, np.maximum(low, self.left.lo))
        hi = np.where(np.isnan(high), hi, np.minimum(high, self.right.hi))
        return lo, hi

    def preimage_point(self, t) -> Interval:
        """Enclosure of c(t), tightened with interval Newton steps."""
        t = Interval(t)
        lo, hi = self.clipped_roots([t.lo], [t.hi])
        enc = Interval(float(lo[0]), float(hi[0]))
        return _newton_refine(self, t, enc)


def _newton_refine(b: Branch, t: Interval, enc: Interval, steps: int = 4) -> Interval:
    a0, b0 = b.inner()
    if not (a0 <= enc.lo and enc.hi <= b0):
        return enc
    for _ in range(steps):
        try:
            _, inv, _ = b.dist_jet(enc)
        except DomainError:
            return enc
        if math.isinf(inv.lo) or math.isinf(inv.hi):
            return enc
        m = Interval(enc.mid)
        fm = b.evaluate(m)
        cand = m - (fm - t) * inv
        new = cand.intersect(enc)
        if new is None or new == enc:
            return enc
        enc = new
    return enc


def branch_preimage(b: Branch, target) -> Interval:
    """Enclosure of {x in domain(b) : F(x) in target}.

    Raises :class:`EmptyPreimage` when the target certainly misses the image.
    """
    target = Interval(target)
    img = b.image
    if target.hi < img.lo or target.lo > img.hi:
        raise EmptyPreimage(f"{target!r} misses the image {img!r}")
    p = b.preimage_point(Interval(target.lo))
    q = b.preimage_point(Interval(target.hi))
    if b.increasing:
        return Interval(p.lo, q.hi)
    return Interval(q.lo, p.hi)


# -- maps -------------------------------------------------------------------

@dataclass(frozen=True)
class Hole:
    """Hole H = [a, b].  ``exact`` records that both endpoints are floats,
    i.e. ``interval`` is H itself rather than an outer enclosure of it."""
    interval: Interval
    exact: bool = True

    def __post_init__(self):
        iv = Interval(self.interval)
        object.__setattr__(self, "interval", iv)
        if iv.lo < 0 or iv.hi > 1:
            raise ConfigError(f"hole {iv!r} is not contained in [0, 1]")

    @classmethod
    def of(cls, lo, hi):
        a, b = to_fraction(lo), to_fraction(hi)
        if a > b:
            raise ConfigError(f"hole [{lo}, {hi}] is empty")
        exact = Fraction(float(a)) == a and Fraction(float(b)) == b
        return cls(Interval(a, b), exact)


@dataclass(frozen=True, eq=False)
class PiecewiseMap:
    branches: tuple
    cut_points: tuple
    inf_abs_deriv: Interval
    min_gap: Interval
    unbounded_derivative: bool
    power: int = 1
    base: "PiecewiseMap | None" = None
    sup_abs_deriv: float = math.inf

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def __call__(self, x):
        """Float evaluation of the map (for plotting and sampling only)."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for k, b in enumerate(self.branches):
            lo = b.left.mid if k else -np.inf
            hi = b.right.mid if k < len(self.branches) - 1 else np.inf
            sel = (x >= lo) & (x < hi)
            out[sel] = b.evaluate_float(x[sel])
        return out

    def branch_of(self, x: float) -> Branch:
        for b in self.branches:
            if x <= b.right.mid:
                return b
        return self.branches[-1]


def _endpoint(v) -> Interval:
    if isinstance(v, Interval):
        return v
    if isinstance(v, (tuple, list)) and len(v) == 2:
        return Interval(v[0], v[1])
    return Interval(to_fraction(v))


def _cells(b: Branch, n: int):
    a0, b0 = b.inner()
    if not a0 < b0:
        return np.array([b.left.lo]), np.array([b.right.hi])
    edges = np.linspace(a0, b0, n + 1)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    lo[0] = b.left.lo
    hi[-1] = b.right.hi
    return lo, hi


def _subdivide(lo, hi, parts: int = 8):
    t = np.arange(1, parts) / parts
    inner = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    edges = np.concatenate([lo[:, None], inner, hi[:, None]], axis=1)
    return edges[:, :-1].ravel(), edges[:, 1:].ravel()


def _branch_and_bound(b: Branch, cell_bound, point_value, minimize: bool,
                      rtol: float = 1e-7, tol: float = DEFAULT_TOL,
                      max_cells: int = 1 << 12):
    """Certified extremum of a per-cell bound, refined where it is not tight.

    ``cell_bound(lo, hi)`` returns a certified lower (minimize) or upper
    bound per cell and ``point_value(x)`` plain estimates at points.  Cells
    whose bound cannot beat the best point estimate are frozen; the rest are
    split until ``tol``.  Returns (certified bound, best estimate).
    """
    lo, hi = _cells(b, 64)
    bound = cell_bound(lo, hi)
    est = point_value(0.5 * lo + 0.5 * hi)
    frozen = []
    for _ in range(60):
        best = float(np.min(est) if minimize else np.max(est))
        if minimize:
            active = bound < best * (1 - rtol)
        else:
            active = bound > best * (1 + rtol) + 1e-300
        active &= (hi - lo) > tol
        frozen.append(bound[~active])
        if not active.any() or lo.size > max_cells:
            frozen.append(bound[active])
            break
        lo, hi = _subdivide(lo[active], hi[active])
        bound = cell_bound(lo, hi)
        est = np.concatenate([est, point_value(0.5 * lo + 0.5 * hi)])
    else:
        frozen.append(bound)
    allb = np.concatenate(frozen)
    if minimize:
        return float(np.min(allb)), float(np.min(est))
    return float(np.max(allb)), float(np.max(est))


def inf_abs_derivative(b: Branch, tol: float = DEFAULT_TOL):
    """(lower bound, upper bound) of inf |F'| over the branch."""
    def cell_bound(lo, hi):
        _, inv, _ = b.dist_jet(IArray(lo, hi))
        lb = div_dir(1.0, inv.mag(), False)
        return np.where(np.isnan(lb), 0.0, lb)

    def point_value(x):
        # rigorous |F'(x)| upper bounds, so the estimate also bounds inf from above
        _, inv, _ = b.dist_jet(IArray.points(x))
        with np.errstate(divide="ignore", invalid="ignore"):
            ub = div_dir(1.0, inv.mig(), True)
        return np.where(np.isnan(ub), np.inf, ub)

    return _branch_and_bound(b, cell_bound, point_value, True, tol=tol)


def sup_abs_distortion(b: Branch, tol: float = DEFAULT_TOL) -> float:
    """Upper bound on sup |F''/F'^2| over the branch (may be inf)."""
    def cell_bound(lo, hi):
        _, _, d = b.dist_jet(IArray(lo, hi))
        ub = d.mag()
        return np.where(np.isnan(ub), np.inf, ub)

    def point_value(x):
        _, _, d = b.dist_jet(IArray.points(x))
        return d.mag()

    return _branch_and_bound(b, cell_bound, point_value, False, tol=tol)[0]


def _sup_abs_deriv_estimate(b: Branch) -> float:
    x = np.linspace(*b.inner(), 257)
    _, inv, _ = b.dist_jet(IArray.points(x))
    with np.errstate(divide="ignore"):
        return float(np.max(1.0 / np.abs(inv.mid)))


def _endpoint_unbounded(b: Branch) -> bool:
    for e in (b.left, b.right):
        _, inv, _ = b.dist_jet(e)
        if inv.lo <= 0 <= inv.hi:
            return True
    return False


def _image(b: Branch) -> Interval:
    fl = b.evaluate(b.left)
    fr = b.evaluate(b.right)
    return fl.hull(fr)


def _finish(branches: Sequence[Branch], cuts, power=1, base=None, tol=DEFAULT_TOL,
            floor: float = 0.0) -> PiecewiseMap:
    lbs, ests = [], []
    unbounded = False
    sup_d = 0.0
    for b in branches:
        lb, est = inf_abs_derivative(b, tol)
        if not lb > 0:
            raise NotExpandingError(
                f"|F'| enclosure contains 0 on the branch {b.domain!r}")
        lbs.append(lb)
        ests.append(est)
        unbounded = unbounded or _endpoint_unbounded(b)
        sup_d = max(sup_d, _sup_abs_deriv_estimate(b))
    lb = max(min(lbs), floor)
    gap = min(R.sub_down(b.right.lo, b.left.hi) for b in branches)
    gap_hi = min(R.sub_up(b.right.hi, b.left.lo) for b in branches)
    return PiecewiseMap(
        branches=tuple(branches),
        cut_points=tuple(cuts),
        inf_abs_deriv=Interval(lb, max(lb, min(ests))),
        min_gap=Interval(max(gap, 0.0), max(gap_hi, gap, 0.0)),
        unbounded_derivative=unbounded,
        power=power,
        base=base,
        sup_abs_deriv=sup_d,
    )


def build_map(branch_specs, tol: float = DEFAULT_TOL) -> PiecewiseMap:
    """Map from ``[((lo, hi), formula), ...]`` covering [0, 1].

    Endpoints may be numbers, literal strings or Intervals; formulas are
    strings in the expression grammar or parsed Exprs.
    """
    if not branch_specs:
        raise ConfigError("a map needs at least one branch")
    branches = []
    prev_hi = None
    cuts = []
    for idx, (dom, formula) in enumerate(branch_specs):
        lo, hi = (_endpoint(v) for v in dom)
        if prev_hi is None:
            if not (lo.lo <= 0.0 <= lo.hi):
                raise ConfigError("the first branch must start at 0")
            cuts.append(lo)
        else:
            if lo.hi < prev_hi.lo:
                raise ConfigError(f"branch {idx + 1} overlaps the previous one")
            if lo.lo > prev_hi.hi:
                raise ConfigError(f"gap between branch {idx} and branch {idx + 1}")
            cuts.append(lo.hull(prev_hi))
        if not lo.hi < hi.lo:
            raise ConfigError(f"branch {idx + 1} has an empty domain")
        e = parse_expr(formula) if isinstance(formula, str) else formula
        dom_iv = Interval(lo.lo, hi.hi)
        b = Branch(lo, hi, (e,), (dom_iv,), True)
        mid = Interval(0.5 * lo.hi + 0.5 * hi.lo)
        try:
            _, inv, _ = b.dist_jet(mid)
        except (DomainError, ZeroDivisionError) as exc:
            raise NotExpandingError(f"branch {idx + 1}: {exc}") from exc
        if inv.lo <= 0 <= inv.hi:
            raise NotExpandingError(f"branch {idx + 1}: derivative vanishes at the midpoint")
        b = Branch(lo, hi, (e,), (dom_iv,), inv.lo > 0)
        img = _image(b)
        slack = 1e-9
        if img.lo < -slack or img.hi > 1 + slack:
            raise ConfigError(f"branch {idx + 1} maps outside [0, 1]: image {img!r}")
        b = Branch(lo, hi, (e,), (dom_iv,), b.increasing, _clip_unit(img))
        branches.append(b)
        prev_hi = hi
    if not (prev_hi.lo <= 1.0 <= prev_hi.hi):
        raise ConfigError("the last branch must end at 1")
    cuts.append(prev_hi)
    return _finish(branches, cuts, tol=tol)


def _clip_unit(iv: Interval) -> Interval:
    return Interval(min(max(iv.lo, 0.0), 1.0), max(min(iv.hi, 1.0), 0.0))


def mod1_map(formula, tol: float = DEFAULT_TOL) -> PiecewiseMap:
    """``f(x) mod 1`` for an increasing f with f(0) >= 0 on [0, 1]."""
    f = parse_expr(formula) if isinstance(formula, str) else formula
    whole = Branch(Interval(0.0), Interval(1.0), (f,), (_UNIT,), True)
    _, inv, _ = whole.dist_jet(Interval(0.5))
    if not inv.lo > 0:
        raise ConfigError("mod1 generator needs an increasing formula")
    f0 = whole.evaluate(Interval(0.0))
    f1 = whole.evaluate(Interval(1.0))
    if f0.lo < 0:
        raise ConfigError("mod1 generator needs f(0) >= 0")
    m0 = math.floor(f0.lo)
    if math.floor(f0.hi) != m0:
        raise PrecisionError("cannot decide the integer part of f(0)")
    m_end = math.ceil(f1.hi)
    if f1.lo != f1.hi and math.ceil(f1.lo) != m_end:
        raise PrecisionError("cannot decide the integer part of f(1)")
    cuts = [Interval(0.0)]
    for m in range(m0 + 1, m_end):
        lin = _linear_inverse(f, m)
        cuts.append(lin if lin is not None else whole.preimage_point(Interval(m)))
    cuts.append(Interval(1.0))
    specs = []
    for i in range(len(cuts) - 1):
        shift = m0 + i
        e = f if shift == 0 else parse_expr(f"({_text(f)}) - {shift}")
        specs.append(((cuts[i], cuts[i + 1]), e))
    return build_map(specs, tol=tol)


def _text(e: Expr) -> str:
    from .rigor.expr import unparse
    return unparse(e)


def _linear_inverse(f: Expr, m: int):
    from .rigor.expr import linear_form
    lf = linear_form(f)
    if lf is None or lf[0] == 0:
        return None
    return Interval((Fraction(m) - lf[1]) / lf[0])


def linear_mod1(slope) -> PiecewiseMap:
    """The map ``slope*x mod 1`` (slope > 1 rational)."""
    q = to_fraction(slope)
    return mod1_map(f"{q.numerator}/{q.denominator}*x" if q.denominator != 1 else f"{q.numerator}*x")


# -- iterates ---------------------------------------------------------------

def iterate_map(m: PiecewiseMap, n: int, tol: float = DEFAULT_TOL) -> PiecewiseMap:
    """Branches of T^n obtained by pulling back the cut points of T."""
    if n < 1:
        raise ValueError("iterate power must be >= 1")
    if n == 1:
        return m
    base = m if m.base is None else m.base
    if m.power != 1:
        raise ValueError("iterate_map expects a map that is not already an iterate")
    t_branches = m.branches
    current = list(t_branches)
    for _ in range(n - 1):
        nxt = []
        for b in current:
            nxt.extend(_pull_back(b, t_branches))
        current = nxt
    _check_separated(current)
    cuts = [current[0].left] + [b.right for b in current]
    floor = _pow_down(m.inf_abs_deriv.lo, n)
    return _finish(current, cuts, power=n, base=base, tol=tol, floor=floor)


def _pow_down(x: float, n: int) -> float:
    r = 1.0
    for _ in range(n):
        r = R.mul_down(r, x)
    return r


def _pull_back(b: Branch, t_branches) -> list:
    img = b.image
    pieces = []
    for tb in t_branches:
        lo_cut, hi_cut = tb.left, tb.right
        # skip T-branches whose domain misses the image of b
        if hi_cut.hi <= img.lo or lo_cut.lo >= img.hi:
            continue
        start = _boundary(b, lo_cut, img, at_low=True)
        end = _boundary(b, hi_cut, img, at_low=False)
        if b.increasing:
            left, right = start, end
        else:
            left, right = end, start
        chain = b.chain + tb.chain
        doms = b.stage_domains + (tb.domain,)
        nb = Branch(left, right, chain, doms, b.increasing == tb.increasing)
        nb = Branch(left, right, chain, doms, nb.increasing, _clip_unit(_image(nb)))
        pieces.append(nb)
    pieces.sort(key=lambda p: p.left.mid)
    return pieces


def _boundary(b: Branch, cut: Interval, img: Interval, at_low: bool):
    """x-enclosure of the preimage under ``b`` of a T cut point, clipped to
    b's own endpoints when the cut lies outside b's image."""
    lo_end = b.left if b.increasing else b.right      # x where F = min
    hi_end = b.right if b.increasing else b.left
    if cut.hi <= img.lo:
        return lo_end
    if cut.lo >= img.hi:
        return hi_end
    if cut.lo > img.lo and cut.hi < img.hi:
        lo, hi = b.clipped_roots([cut.lo], [cut.hi])
        enc = Interval(float(lo[0]), float(hi[0]))
        return enc
    raise PrecisionError(
        f"cannot decide whether the cut {cut!r} lies inside the image {img!r}")


def _check_separated(branches):
    for b in branches:
        if not b.left.hi < b.right.lo:
            raise PrecisionError(
                f"pulled-back cut points overlap near x={b.left.mid!r}")
    for p, q in zip(branches, branches[1:]):
        if not p.right.overlaps(q.left):
            raise PrecisionError(f"branches do not join near x={p.right.mid!r}")


# -- distortion -------------------------------------------------------------

def distortion_sup(m: PiecewiseMap, tol: float = DEFAULT_TOL) -> float:
    return max(sup_abs_distortion(b, tol) for b in m.branches)


def distortion_excess_integral(m: PiecewiseMap, l: float, tol: float = DEFAULT_TOL,
                               max_cells: int = 1 << 18):
    """Enclosure of the integral of |F''/F'^2| over {|F''/F'^2| > l}.

    Returns ``(integral, sup_below)`` where ``sup_below`` bounds the
    distortion on the complement (always <= l).  On a cell where the sign of
    the distortion is certified the integral equals the variation of 1/F'
    across the cell, which stays exact up to the singular points of Lorenz
    type branches; elsewhere width * sup|D| is used.
    """
    if not l > 0:
        raise ValueError("threshold l must be positive")
    total_lo, total_hi = [], []
    sup_below = 0.0
    straddled = False
    for b in m.branches:
        lo, hi = _cells(b, 256)
        for _ in range(100):
            _, _, d = b.dist_jet(IArray(lo, hi))
            mag, mig = d.mag(), d.mig()
            below = mag <= l
            above = mig > l
            straddle = ~below & ~above
            if below.any():
                sup_below = max(sup_below, float(mag[below].max()))
            if above.any():
                ilo, ihi = _variation(b, lo[above], hi[above], d[above])
                total_lo.append(ilo)
                total_hi.append(ihi)
            small = straddle & ((hi - lo) <= tol)
            if small.any() or (straddle.any() and lo.size > max_cells):
                force = straddle if lo.size > max_cells else small
                ilo, ihi = _variation(b, lo[force], hi[force], d[force], certain=False)
                total_hi.append(ihi)
                straddled = True
                straddle = straddle & ~force
            if not straddle.any():
                break
            lo, hi = _subdivide(lo[straddle], hi[straddle])
    lo_parts = np.concatenate(total_lo) if total_lo else np.zeros(0)
    hi_parts = np.concatenate(total_hi) if total_hi else np.zeros(0)
    integral = Interval(_sum_down(lo_parts), _sum_up(hi_parts))
    if straddled:
        sup_below = l
    sup_below = min(sup_below, l)
    return integral, Interval(0.0, sup_below)


def _variation(b: Branch, lo, hi, d: IArray, certain: bool = True):
    """Per-cell (lower, upper) bounds of the integral of |D| over [lo, hi]."""
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    first = lo == b.left.lo
    last = hi == b.right.hi
    a_lo = np.where(first, b.left.lo, lo)
    a_hi = np.where(first, b.left.hi, lo)
    c_lo = np.where(last, b.right.lo, hi)
    c_hi = np.where(last, b.right.hi, hi)
    _, inv_a, _ = b.dist_jet(IArray(a_lo, a_hi))
    _, inv_c, _ = b.dist_jet(IArray(c_lo, c_hi))
    diff = abs(inv_c - inv_a)
    signed = (d.lo > 0) | (d.hi < 0)
    width = add_dir(hi, -lo, True)
    crude = mul_dir(width, d.mag(), True)
    upper = np.where(signed, np.minimum(diff.hi, crude), crude)
    upper = np.where(np.isnan(upper), np.inf, upper)
    if certain:
        lower = np.where(signed, diff.lo, 0.0)
    else:
        lower = np.zeros_like(upper)
    return lower, upper


def _sum_up(v) -> float:
    v = np.sort(np.asarray(v, dtype=float))
    return R.sum_up(v.tolist())


def _sum_down(v) -> float:
    v = np.sort(np.asarray(v, dtype=float))
    return R.sum_down(v.tolist())
