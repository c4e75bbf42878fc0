"""Bound matrix, its Perron root and the certified decay / escape bounds.

With the Lasota-Yorke coefficients (A, lam1, B), the approximation constants
(C, D), the coarse contraction (n1, lam2) and the grid size delta, the vector
(||L^{i n1} g||_BV, ||L^{i n1} g||_1) is dominated by M^i times the initial
pair, where

    M = [[A lam1^n1, B], [delta C, delta n1 D + lam2]].

Everything here is 2x2 interval arithmetic.  Entries are enclosures of the
upper bounds, so a theorem stated for the point matrix of upper endpoints
holds for every bound reported below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .contraction import ContractionCertificate, RigorousVector, fixed_point, rigorous_matvec
from .errors import ExpansionTooWeak, PrecisionError
from .lasota_yorke import LYCertificate
from .rigor import rounding as R
from .rigor.interval import Interval
from .ulam import ApproxCoefficients, UlamMatrix, bv_norm

ZERO = Interval(0.0)
ONE = Interval(1.0)
TWO = Interval(2.0)


def _nonneg(x: Interval) -> Interval:
    return Interval(max(x.lo, 0.0), max(x.hi, 0.0))


@dataclass(frozen=True)
class BoundMatrix:
    m11: Interval
    m12: Interval
    m21: Interval
    m22: Interval

    def __post_init__(self):
        for name in ("m11", "m12", "m21", "m22"):
            v = getattr(self, name)
            if v.hi < 0:
                raise ValueError(f"{name} must be nonnegative, got {v!r}")

    def rows(self):
        return [[self.m11, self.m12], [self.m21, self.m22]]

    def upper(self) -> "BoundMatrix":
        """Point matrix of upper endpoints (the matrix the theorem is applied to)."""
        return BoundMatrix(*(Interval(x.hi) for x in (self.m11, self.m12, self.m21, self.m22)))

    def lower(self) -> "BoundMatrix":
        return BoundMatrix(*(Interval(max(x.lo, 0.0)) for x in (self.m11, self.m12, self.m21, self.m22)))

    def __matmul__(self, other: "BoundMatrix") -> "BoundMatrix":
        a, b = self, other
        return BoundMatrix(a.m11 * b.m11 + a.m12 * b.m21, a.m11 * b.m12 + a.m12 * b.m22,
                           a.m21 * b.m11 + a.m22 * b.m21, a.m21 * b.m12 + a.m22 * b.m22)

    def power(self, i: int) -> "BoundMatrix":
        if i < 0:
            raise ValueError("negative power")
        out = BoundMatrix(ONE, ZERO, ZERO, ONE)
        base = self
        while i:
            if i & 1:
                out = out @ base
            i >>= 1
            if i:
                base = base @ base
        return out

    def as_strings(self):
        return [[x.as_strings() for x in row] for row in self.rows()]


def assemble_M(ly: LYCertificate, ac: ApproxCoefficients, cc, delta) -> BoundMatrix:
    """Entries of the bound matrix, outward rounded.

    ``cc`` is anything with ``n1`` and ``lambda2`` (normally a
    ContractionCertificate).
    """
    n1 = int(cc.n1)
    if n1 < 1:
        raise ValueError("n1 must be >= 1")
    lam1 = ly.lambda1
    if not lam1.hi < 1:
        raise ExpansionTooWeak(f"lambda1 <= {lam1.hi!r} is not < 1")
    d = Interval(delta)
    # lambda2 is an upper bound: the matrix uses that bound itself
    lam2 = Interval(Interval(cc.lambda2).hi)
    m11 = ly.A * lam1.pow(n1)
    m12 = ly.B
    m21 = d * ac.C
    m22 = d * Interval(float(n1)) * ac.D + lam2
    return BoundMatrix(_nonneg(m11), _nonneg(m12), _nonneg(m21), _nonneg(m22))


def _rho_formula(m: BoundMatrix) -> Interval:
    diff = m.m11 - m.m22
    disc = abs(diff).square() + Interval(4.0) * m.m12 * m.m21
    return (m.m11 + m.m22 + disc.sqrt()) / TWO


def spectral_radius_rho(M: BoundMatrix) -> Interval:
    """Closed-form Perron root.

    The Perron root of a nonnegative matrix is nondecreasing in every entry,
    so evaluating at the lower and at the upper corner gives a tight
    enclosure over the whole entry box.
    """
    lo = _rho_formula(M.lower()).lo
    hi = _rho_formula(M.upper()).hi
    return Interval(max(lo, 0.0), hi)


def _x_term(m: BoundMatrix) -> Interval:
    # X = d + sqrt(d^2 + 4 m12 m21) with d = m11 - m22
    diff = m.m11 - m.m22
    return diff + (abs(diff).square() + Interval(4.0) * m.m12 * m.m21).sqrt()


def left_eigen_ab(M: BoundMatrix, rho: Interval | None = None):
    """Left Perron vector (a, b), a + b = 1.

    a = X / (X + 2 m12) and b = 2 m12 / (X + 2 m12).  X is nondecreasing in
    m11, m12, m21 and nonincreasing in m22, and a is increasing in X and
    decreasing in m12; endpoints are taken at the matching corners.
    """
    lo_corner = BoundMatrix(Interval(M.m11.lo), Interval(M.m12.lo), Interval(M.m21.lo), Interval(M.m22.hi))
    hi_corner = BoundMatrix(Interval(M.m11.hi), Interval(M.m12.hi), Interval(M.m21.hi), Interval(M.m22.lo))
    x_lo = _nonneg(_x_term(lo_corner)).lo
    x_hi = _x_term(hi_corner).hi
    b2_lo = R.mul_down(2.0, M.m12.lo)
    b2_hi = R.mul_up(2.0, M.m12.hi)
    den_lo = R.add_down(x_lo, b2_hi)       # denominator at the corner minimising a
    den_hi = R.add_down(x_hi, b2_lo)
    if not (den_lo > 0 and den_hi > 0):
        raise PrecisionError("denominator of the eigenvector formula is not bounded away from 0")
    a_lo = R.div_down(x_lo, R.add_up(x_lo, b2_hi))
    a_hi = min(1.0, R.div_up(x_hi, den_hi))
    b_lo = R.div_down(b2_lo, R.add_up(b2_lo, x_hi))
    b_hi = min(1.0, R.div_up(b2_hi, den_lo))
    return Interval(a_lo, a_hi), Interval(b_lo, b_hi)


@dataclass(frozen=True)
class TableRow:
    h: int
    i: int
    strong: tuple   # (coefficient of ||g||_s, coefficient of ||g||_w)
    weak: tuple

    def as_dict(self):
        return {"h": self.h, "strong": [x.as_strings() for x in self.strong],
                "weak": [x.as_strings() for x in self.weak]}


def power_table(M: BoundMatrix, steps, n1: int = 1) -> list:
    """Rows of M^i for each i in ``steps``; h = i * n1."""
    out = []
    for i in steps:
        P = M.power(int(i))
        out.append(TableRow(int(i) * n1, int(i), (P.m11, P.m12), (P.m21, P.m22)))
    return out


@dataclass(frozen=True)
class DecayCertificate:
    M: BoundMatrix
    rho: Interval
    a: Interval
    b: Interval
    n1: int
    mode: str                      # "mixing" or "escape"
    A: Interval
    B: Interval
    delta: Interval = ONE
    inputs: dict = field(default_factory=dict, compare=False)

    @property
    def conclusive(self) -> bool:
        return self.rho.hi < 1

    def strong_constant(self) -> Interval:
        """A/a + B/b."""
        return self.A / self.a + self.B / self.b

    def weak_constant(self) -> Interval:
        """max(1, B)/b; the max keeps the bound valid for k < n1 when B < 1."""
        B = Interval(max(1.0, self.B.lo), max(1.0, self.B.hi))
        return B / self.b

    def rate_power(self, k: int) -> Interval:
        return self.rho.pow(k // self.n1)

    def phi_strong(self, k: int) -> Interval:
        return self.strong_constant() * self.rate_power(k)

    def phi_weak(self, k: int) -> Interval:
        return self.weak_constant() * self.rate_power(k)


def certify_decay(ly: LYCertificate, ac: ApproxCoefficients, cc, delta,
                  mode: str = "mixing") -> DecayCertificate:
    if mode not in ("mixing", "escape"):
        raise ValueError(f"unknown mode {mode!r}")
    space = getattr(cc, "space", None)
    want = "zero_average" if mode == "mixing" else "whole"
    if space is not None and space != want:
        raise ValueError(f"{mode} needs a contraction certificate on the {want} space, got {space}")
    M = assemble_M(ly, ac, cc, delta)
    rho = spectral_radius_rho(M)
    a, b = left_eigen_ab(M, rho)
    inputs = {"lambda1": ly.lambda1, "lambda2": Interval(Interval(cc.lambda2).hi),
              "C": ac.C, "D": ac.D, "ly_provenance": ly.provenance}
    return DecayCertificate(M, rho, a, b, int(cc.n1), mode, ly.A, ly.B, Interval(delta), inputs)


def decay_bounds(dc: DecayCertificate, ly: LYCertificate | None = None, k: int = 0):
    """(strong, weak) bounds on ||L^k g||_s / ||g||_s and ||L^k g||_w / ||g||_s."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if ly is not None and (ly.A != dc.A or ly.B != dc.B):
        raise ValueError("Lasota-Yorke coefficients do not match the certificate")
    return dc.phi_strong(k), dc.phi_weak(k)


def escape_rate_bound(dc: DecayCertificate) -> Interval:
    """Certified per-step escape rate: the lower end is -log(rho.hi)/n1.

    Returns [0, 0] when rho.hi >= 1 (inconclusive, not an error).
    """
    if dc.mode != "escape":
        raise ValueError("escape rate needs an escape-mode certificate")
    if not dc.rho.hi < 1:
        return Interval(0.0)
    n = float(dc.n1)
    lo = R.div_down(-R.log_up(dc.rho.hi), n)
    hi = math.inf if dc.rho.lo <= 0 else R.div_up(-R.log_down(dc.rho.lo), n)
    return Interval(max(lo, 0.0), hi)


# -- invariant density ---------------------------------------------------------

@dataclass(frozen=True)
class DensityResult:
    f_delta: RigorousVector
    l1_error: Interval
    terms: dict = field(default_factory=dict, compare=False)
    method: str = "resolvent"


def _resolvent_sum(cc: ContractionCertificate) -> float:
    """Upper bound on sum_{n>=0} ||L_delta^n restricted to zero-average vectors||_1.

    Every power has norm <= 1, and for any m with lam2(m) < 1 the powers
    n = q m + r are bounded by lam2(m)^q * min(1, lam2(r)).
    """
    lam = {int(n): float(v) for n, v, _ in cc.trace}
    lam.setdefault(cc.n1, cc.lambda2.hi)
    best = math.inf
    for m, lm in sorted(lam.items()):
        if not lm < 1:
            continue
        head = R.sum_up([1.0] + [min(1.0, lam.get(r, 1.0)) for r in range(1, m)])
        best = min(best, R.div_up(head, R.sub_down(1.0, lm)))
    if best == math.inf:
        raise PrecisionError("no contraction step with lambda2 < 1")
    return best


def _bv_up(v) -> float:
    return R.mul_up(bv_norm(v), 1.0 + R.gamma(len(v) + 2))


def invariant_density_with_error(u: UlamMatrix, dc: DecayCertificate, ly: LYCertificate,
                                 ac: ApproxCoefficients, N: int | None = None,
                                 cc: ContractionCertificate | None = None,
                                 backend: str | None = None) -> DensityResult:
    """Approximate invariant density f_delta with a certified bound on ||f - f_delta||_1.

    Two bounds are computed and the smaller is reported; all terms are kept
    in ``terms`` for audit.

    * composition: ||f_d - f|| <= ||L^N f_d - L_d^N f_d|| + ||L_d^N f_d - f_d||
      + ||L^N (f_d - f)||, bounded by the approximation inequality, N * eps_fix
      and the weak decay bound with ||f||_BV <= B;
    * resolvent (needs ``cc``): (I - L_d)(f - f_d*) = (L - L_d) f on zero-average
      vectors, so ||f - f_d|| <= S (delta (C B + D) + eps_fix) + |mass - 1|,
      with S the resolvent sum from the contraction trace.
    """
    if dc.mode != "mixing":
        raise ValueError("invariant density needs a mixing certificate")
    if not dc.conclusive:
        raise PrecisionError("decay certificate is inconclusive (rho >= 1)")
    k = u.k
    f = fixed_point(u)
    f = f * (k / math.fsum(f))
    mass = Interval(math.fsum(f)) / Interval(float(k))
    mass_err = max(abs(mass.lo - 1.0), abs(mass.hi - 1.0))
    img = rigorous_matvec(u, RigorousVector(f), backend)
    diff = float(np.sum(np.abs(img.values - f)))
    eps_fix = R.add_up(R.mul_up(R.mul_up(diff, 1.0 + R.gamma(k + 1)), R.div_up(1.0, float(k))), img.err_l1)
    f_l1 = R.add_up(1.0, mass_err)
    f_bv = _bv_up(f)
    delta = dc.delta.hi
    C, D, B = ac.C.hi, ac.D.hi, ly.B.hi
    f_true_bv = B

    # composition bound, N a multiple of n1
    n1 = dc.n1
    wk = dc.weak_constant().hi
    best_comp, best_n = math.inf, None
    candidates = [N] if N is not None else [n1 * i for i in range(1, 400)]
    for n in candidates:
        t1 = R.mul_up(delta, R.add_up(R.mul_up(C, f_bv), R.mul_up(R.mul_up(float(n), D), f_l1)))
        t2 = R.mul_up(float(n), eps_fix)
        t3 = R.mul_up(R.mul_up(wk, dc.rho.pow(n // n1).hi), R.add_up(f_bv, f_true_bv))
        tot = R.sum_up([t1, t2, t3])
        if tot < best_comp:
            best_comp, best_n, parts = tot, n, (t1, t2, t3)
    terms = {"eps_fix": eps_fix, "mass_error": mass_err, "bv_f_delta": f_bv,
             "bv_f_bound": f_true_bv, "composition": {
                 "N": best_n, "discretization": parts[0], "near_fixity": parts[1],
                 "decay": parts[2], "total": best_comp}}
    best, method = best_comp, "composition"
    if cc is not None:
        S = _resolvent_sum(cc)
        one_step = R.mul_up(delta, R.add_up(R.mul_up(C, f_true_bv), D))
        res = R.add_up(R.mul_up(S, R.add_up(one_step, eps_fix)), mass_err)
        terms["resolvent"] = {"sum": S, "discretization": one_step, "total": res}
        if res < best:
            best, method = res, "resolvent"
    return DensityResult(RigorousVector(f, 0.0), Interval(0.0, best), terms, method)


# -- export --------------------------------------------------------------------

def certificate_dict(dc: DecayCertificate, ly: LYCertificate | None = None,
                     tables=(), extra: dict | None = None) -> dict:
    doc = {
        "mode": dc.mode,
        "delta": dc.delta.as_strings(),
        "n1": dc.n1,
        "lambda1": dc.inputs["lambda1"].as_strings(),
        "lambda2": dc.inputs["lambda2"].as_strings(),
        "A": dc.A.as_strings(),
        "B": dc.B.as_strings(),
        "C": dc.inputs["C"].as_strings(),
        "D": dc.inputs["D"].as_strings(),
        "M": dc.M.as_strings(),
        "rho": dc.rho.as_strings(),
        "a": dc.a.as_strings(),
        "b": dc.b.as_strings(),
        "conclusive": dc.conclusive,
        "constants": {"strong": dc.strong_constant().as_strings(),
                      "weak": dc.weak_constant().as_strings()},
        "tables": [row.as_dict() for row in tables],
        "ly_provenance": dc.inputs.get("ly_provenance", "computed"),
    }
    if dc.mode == "escape":
        rate = escape_rate_bound(dc)
        doc["escape_rate"] = rate.as_strings()
        doc["escape_prefactor"] = (ONE / dc.b).as_strings()
    if ly is not None and ly.details:
        doc["ly_details"] = ly.details
    if extra:
        doc.update(extra)
    return doc


def _plain(o):
    if isinstance(o, Interval):
        return o.as_strings()
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, (float, np.floating)):
        return repr(float(o))
    if isinstance(o, np.integer):
        return int(o)
    return o


def dumps(doc: dict) -> str:
    """Canonical JSON: sorted keys, every float as its shortest repr string."""
    return json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n"


def parse_certificate(text: str) -> dict:
    """Load an exported certificate; bound strings become Intervals where paired."""
    doc = json.loads(text)
    for key in ("rho", "a", "b", "lambda1", "lambda2", "A", "B", "C", "D", "delta", "escape_rate"):
        if key in doc:
            lo, hi = doc[key]
            doc[key] = Interval(float(lo), float(hi))
    return doc
