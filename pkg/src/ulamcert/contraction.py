"""Certified coarse contraction ||L_delta^n v||_1 <= lambda2 ||v||_1.

The sup over the unit ball is reduced to its extreme points: (f_i - f_j)/2
on the zero-average space (mixing) and +-f_i on the whole space (escape),
with f_i = k * 1_{I_i} the L1-normalised cell indicators.  For the mixing
case every pair is bounded through a reference vector w,

    ||L^n (f_i - f_j)/2|| <= (||L^n f_i - w|| + ||L^n f_j - w||) / 2,

so one pass over the k basis vectors suffices.  Iterates are computed in
floating point with the midpoint matrix; the distance to the true iterate of
any matrix inside the entry enclosures is tracked by a separate scalar
error bound that is added at the end.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import NoContraction, PrecisionError
from .rigor import rounding as R
from .rigor.interval import Interval
from .ulam import UlamMatrix


@dataclass(frozen=True)
class RigorousVector:
    """Cell averages plus a bound on the L1 distance to the vector they stand for."""
    values: np.ndarray
    err_l1: float = 0.0

    def l1(self) -> float:
        """Upper bound on the L1 norm of ``values`` (not including err)."""
        k = self.values.size
        s = float(np.sum(np.abs(self.values)))
        return R.mul_up(R.mul_up(s, 1.0 + R.gamma(k)), R.div_up(1.0, float(k)))


@dataclass(frozen=True)
class MatrixConstants:
    """Scalars driving the error recursion (all rounded up)."""
    col_sum: float      # min(1, max column sum of upper bounds): bounds ||P||_1
    radius: float       # max column sum of entry radii
    mid_norm: float     # max column sum of midpoints
    gamma: float        # float matvec error factor
    unit_gamma: float   # norm evaluation error factor


def matrix_constants(u: UlamMatrix) -> MatrixConstants:
    _, hi_sums = u.column_sums()
    cs = min(1.0, float(hi_sums.max()) if hi_sums.size else 0.0)
    rad = u.rad
    nnz = u.column_nnz()
    mid = u.mid
    r = float(_col_max_sum(u.indptr, rad))
    cmid = float(_col_max_sum(u.indptr, mid))
    rows = int(u.row_nnz().max()) if u.nnz else 0
    g = R.gamma(rows + 1)
    return MatrixConstants(cs, r, cmid, g, R.gamma(u.k + 1))


def _col_max_sum(indptr, vals) -> float:
    counts = np.diff(indptr)
    if vals.size == 0:
        return 0.0
    sums = np.add.reduceat(vals, indptr[:-1])
    sums = np.where(counts == 0, 0.0, sums)
    m = float(sums.max())
    n = int(counts.max())
    return R.mul_up(m, 1.0 + R.gamma(n + 1))


def error_sequence(c: MatrixConstants, nsteps: int):
    """(e_n, S_n) for n = 0..nsteps: e_n bounds ||P^n f - v_n||_1 for ||f||_1 = 1
    and S_n bounds the norm of the float iterate v_n."""
    e = [0.0]
    S = [1.0]
    growth = R.mul_up(c.mid_norm, 1.0 + c.gamma)
    per = R.add_up(c.radius, R.mul_up(c.gamma, c.mid_norm))
    for _ in range(nsteps):
        e.append(R.add_up(R.mul_up(c.col_sum, e[-1]), R.mul_up(per, S[-1])))
        S.append(R.mul_up(S[-1], growth))
    return e, S


def rigorous_matvec(u: UlamMatrix, v: RigorousVector, backend: str | None = None) -> RigorousVector:
    c = matrix_constants(u)
    values = _kernels.matvec(u.indptr, u.indices, u.mid, v.values, backend)
    nv = v.l1()
    grow = R.mul_up(R.add_up(c.radius, R.mul_up(c.gamma, c.mid_norm)), nv)
    err = R.add_up(R.mul_up(c.col_sum, v.err_l1), grow)
    return RigorousVector(values, err)


@dataclass(frozen=True)
class ContractionCertificate:
    n1: int
    lambda2: Interval
    space: str                      # "zero_average" or "whole"
    basis_count: int
    trace: tuple = field(default=(), compare=False)   # (n, lambda2_upper, err)
    reference: np.ndarray | None = field(default=None, compare=False, repr=False)

    def usable(self) -> bool:
        return self.lambda2.hi < 1

    def export_trace(self, path) -> None:
        write_trace(self.trace, path)


def write_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "lambda2_upper", "err_component"])
        for n, lam, err in trace:
            w.writerow([n, repr(lam), repr(err)])


def fixed_point(u: UlamMatrix, tol: float = 1e-15, max_iter: int = 200000) -> np.ndarray:
    """Float power iteration of the midpoint matrix, normalised to mass 1."""
    k = u.k
    A = u.to_scipy("mid")
    v = np.ones(k)
    for it in range(max_iter):
        y = A @ v
        s = y.sum()
        if not s > 0:
            raise PrecisionError("power iteration lost all mass")
        y *= k / s
        if np.abs(y - v).sum() / k <= tol:
            return y
        v = y
    if np.abs(y - v).sum() / k > 1e-9:
        raise PrecisionError("power iteration did not converge")
    return y


def _bounds(raw: np.ndarray, k: int, c: MatrixConstants, e) -> np.ndarray:
    """Per step upper bounds max_i ||L^n f_i - w||_1 from raw float sums."""
    mx = raw.max(axis=0)
    inv_k = R.div_up(1.0, float(k))
    fac = R.mul_up(1.0 + c.unit_gamma, inv_k)
    out = np.empty(mx.size)
    for n in range(mx.size):
        out[n] = R.add_up(R.mul_up(float(mx[n]), fac), e[n + 1])
    return out


PAIRWISE_MAX_K = 64


def _full(u, run, cols, nsteps, c, e, space):
    lam = _bounds(run(cols, nsteps), u.k, c, e)
    if space == "zero_average" and u.k <= PAIRWISE_MAX_K:
        lam = np.minimum(lam, _pairwise(u, nsteps, c, e))
    return lam


def _pairwise(u: UlamMatrix, nsteps: int, c: MatrixConstants, e) -> np.ndarray:
    """Direct max over pairs of ||L^n (f_i - f_j)/2||_1 for small k."""
    k = u.k
    M = u.to_dense("mid")
    V = np.eye(k) * float(k)
    inv_k = R.div_up(1.0, float(k))
    fac = R.mul_up(R.mul_up(1.0 + c.unit_gamma, inv_k), 0.5)
    out = np.empty(nsteps)
    for n in range(nsteps):
        V = M @ V
        worst = 0.0
        for i in range(k):
            worst = max(worst, float(np.abs(V[:, i:i + 1] - V).sum(axis=0).max()))
        # each of f_i, f_j carries its own error e_n; the half cancels the 2
        out[n] = R.add_up(R.mul_up(worst, fac), e[n + 1])
    return out


def _search(u: UlamMatrix, w: np.ndarray, target: float, n_max: int, space: str,
            pilot: int, backend: str | None) -> ContractionCertificate:
    k = u.k
    c = matrix_constants(u)
    e, _ = error_sequence(c, n_max)
    scale = float(k)
    cols_all = np.arange(k)

    def run(cols, nsteps):
        return _kernels.basis_norms(u.indptr, u.indices, u.mid, cols, nsteps, w, scale, backend)

    # pilot on a subsample to guess the horizon; the full run decides
    nsteps = n_max
    if pilot and k > pilot:
        sub = np.unique(np.linspace(0, k - 1, pilot).round().astype(np.int64))
        pb = _bounds(run(sub, n_max), k, c, e)
        hit = np.nonzero(pb <= target * 0.97)[0]
        if hit.size:
            nsteps = min(n_max, int(hit[0]) + 3)
    lam = _full(u, run, cols_all, nsteps, c, e, space)
    if not np.any(lam <= target) and nsteps < n_max:
        nsteps = n_max
        lam = _full(u, run, cols_all, nsteps, c, e, space)
    trace = tuple((n + 1, float(lam[n]), float(e[n + 1])) for n in range(lam.size))
    ok = np.nonzero(lam <= target)[0]
    if ok.size == 0:
        best = int(np.argmin(lam))
        raise NoContraction(f"lambda2 <= {target} not reached within n_max={n_max}",
                            best + 1, float(lam[best]), trace)
    n1 = int(ok[0]) + 1
    return ContractionCertificate(n1, Interval(0.0, float(lam[n1 - 1])), space, k,
                                  trace, w if space == "zero_average" else None)


def estimate_lambda2_mixing(u: UlamMatrix, target: float = 0.5, n_max: int = 64,
                            pilot: int = 256, backend: str | None = None,
                            reference: np.ndarray | None = None) -> ContractionCertificate:
    """Smallest n <= n_max with a certified lambda2 <= target on zero-average vectors."""
    if u.hole_rows or u.hole is not None:
        raise ValueError("mixing certificate needs a closed system")
    if not target < 1:
        raise ValueError("target must be < 1")
    w = fixed_point(u) if reference is None else np.asarray(reference, dtype=float)
    return _search(u, w, target, n_max, "zero_average", pilot, backend)


def estimate_lambda2_escape(u: UlamMatrix, target: float = 0.5, n_max: int = 64,
                            pilot: int = 256, backend: str | None = None) -> ContractionCertificate:
    """Smallest n <= n_max with a certified lambda2 <= target on all vectors."""
    if not target < 1:
        raise ValueError("target must be < 1")
    return _search(u, np.zeros(u.k), target, n_max, "whole", pilot, backend)
