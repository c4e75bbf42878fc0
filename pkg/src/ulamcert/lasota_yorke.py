"""Lasota-Yorke coefficients ``||L^n f||_BV <= A lam1^n ||f||_BV + B ||f||_1``.

Three sources: the one-step inequality for maps with bounded distortion,
the threshold form for Lorenz-type maps with unbounded derivative, and the
doubled one-step inequality for a map with a hole.  Every source is first
turned into a one-step pair (2*lam, B') and then collapsed uniformly in n.
User-supplied coefficients are accepted and tagged as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dynamics import DEFAULT_TOL, Hole, PiecewiseMap, distortion_excess_integral, distortion_sup
from .errors import DomainError, ExpansionTooWeak
from .rigor.interval import Interval

NORM_PAIR = ("BV", "L1")
ONE = Interval(1.0)
TWO = Interval(2.0)


@dataclass(frozen=True)
class OneStepLY:
    """``||L g||_BV <= contraction ||g||_BV + affine_term ||g||_1``."""
    contraction: Interval
    affine_term: Interval

    def __post_init__(self):
        object.__setattr__(self, "contraction", Interval(self.contraction))
        object.__setattr__(self, "affine_term", Interval(self.affine_term))
        if self.contraction.lo < 0 and self.contraction.hi < 0:
            raise ValueError("contraction must be nonnegative")


@dataclass(frozen=True)
class LYCertificate:
    A: Interval
    lambda1: Interval
    B: Interval
    provenance: str = "computed"
    norm_pair: tuple = NORM_PAIR
    details: dict = field(default_factory=dict, compare=False)

    def usable(self) -> bool:
        return self.lambda1.hi < 1

    def as_dict(self) -> dict:
        return {"A": self.A.as_strings(), "lambda1": self.lambda1.as_strings(),
                "B": self.B.as_strings(), "provenance": self.provenance}


def user_supplied(A, lambda1, B) -> LYCertificate:
    """Certificate from externally established coefficients."""
    cert = LYCertificate(Interval(A), Interval(lambda1), Interval(B), "user_supplied")
    if cert.B.lo < 0 or cert.A.lo < 1:
        raise ValueError("need A >= 1 and B >= 0")
    return cert


def _two_over(x: Interval) -> Interval:
    if not x.lo > 0:
        raise ExpansionTooWeak(f"non-positive lower bound {x!r}")
    return TWO / x


def ly_one_step(m: PiecewiseMap, tol: float = DEFAULT_TOL) -> OneStepLY:
    """(2/inf|T'|, 2/min gap + 2 sup|T''/T'^2|)."""
    if m.unbounded_derivative:
        raise DomainError("unbounded derivative: use ly_lorenz")
    infd = m.inf_abs_deriv
    if not infd.lo > 2:
        raise ExpansionTooWeak(
            f"inf|T'| >= {infd.lo:.6g} is not > 2; iterate the map first")
    contraction = _two_over(infd)
    dist = Interval(0.0, distortion_sup(m, tol))
    affine = _two_over(m.min_gap) + TWO * dist
    return OneStepLY(contraction, Interval(affine.lo if affine.lo > 0 else 0.0, affine.hi))


def ly_iterate(one: OneStepLY) -> LYCertificate:
    """Uniform-in-n form: A = 1, lam1 = contraction, B = B'/(1 - contraction)."""
    c = one.contraction
    if not c.hi < 1:
        raise ExpansionTooWeak(f"one-step contraction {c.hi:.6g} is not < 1")
    B = one.affine_term / (ONE - c)
    return LYCertificate(ONE, c, B, "computed",
                         details={"one_step": [c.as_strings(), one.affine_term.as_strings()]})


def ly_lorenz(m: PiecewiseMap, l, tol: float = DEFAULT_TOL) -> LYCertificate:
    """Threshold form for maps whose derivative may blow up at cut points.

    lam1 <= 1/2 * int_{I_l} |T''/T'^2| + 2/inf|T'| and
    B <= (2/min gap + l) / (1 - lam1).
    """
    l_iv = Interval(l)
    integral, sup_below = distortion_excess_integral(m, l_iv.hi, tol)
    lam = Interval(0.5) * integral + _two_over(m.inf_abs_deriv)
    if not lam.hi < 1:
        raise ExpansionTooWeak(
            f"lambda1 <= {lam.hi:.6g} is not < 1; try a larger l or a higher iterate")
    B = (_two_over(m.min_gap) + l_iv) / (ONE - lam)
    return LYCertificate(ONE, lam, B, "computed", details={
        "l": l_iv.as_strings(),
        "excess_integral": integral.as_strings(),
        "sup_distortion_below": sup_below.as_strings(),
        "inf_abs_deriv": repr(m.inf_abs_deriv.lo),
        "min_gap": repr(m.min_gap.lo),
    })


def ly_hole(closed: OneStepLY, h: Hole | None = None) -> LYCertificate:
    """Hole version: one step (4 lam, 2 B') collapsed as in ly_iterate."""
    c2 = TWO * closed.contraction
    if not c2.hi < 1:
        raise ExpansionTooWeak(f"4*lambda = {c2.hi:.6g} is not < 1")
    B = (TWO * closed.affine_term) / (ONE - c2)
    details = {"closed_one_step": [closed.contraction.as_strings(),
                                   closed.affine_term.as_strings()]}
    if h is not None:
        details["hole"] = h.interval.as_strings()
    return LYCertificate(ONE, c2, B, "computed", details=details)
