"""Certified Ulam discretization on a uniform partition of [0, 1].

Cells are I_i = [(i-1)/k, i/k] (1-based in every export and message) and the
matrix entry (j, i) encloses m(I_i ∩ T^{-1} I_j) / m(I_i), the mass sent from
cell i to cell j.  Densities are column vectors of cell averages, so the
discretized operator acts by left multiplication.  Entries are held in CSC
form as lower/upper float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .dynamics import Branch, Hole, PiecewiseMap
from .errors import AssemblyError, ConfigError, ExpansionTooWeak
from .lasota_yorke import LYCertificate
from .rigor import rounding as R
from .rigor.iarray import add_dir, mul_dir
from .rigor.interval import Interval

U = R.UNIT_ROUNDOFF


@dataclass(frozen=True)
class Partition:
    k: int

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("a partition needs k >= 2 cells")

    @property
    def delta(self) -> Interval:
        return Interval(Fraction(1, self.k))

    @property
    def power_of_two(self) -> bool:
        return self.k & (self.k - 1) == 0

    def grid(self):
        """Enclosures of the grid points j/k, j = 0..k."""
        j = np.arange(self.k + 1, dtype=float)
        if self.power_of_two:
            g = j / self.k
            return g, g
        kf = float(self.k)
        from .rigor.iarray import div_dir
        return div_dir(j, kf, False), div_dir(j, kf, True)

    def cell_of(self, x: float) -> int:
        """1-based cell containing x (right-closed except at 0)."""
        return min(self.k, max(1, math.ceil(x * self.k)))


@dataclass(frozen=True)
class ApproxCoefficients:
    C: Interval
    D: Interval

    def as_dict(self):
        return {"C": self.C.as_strings(), "D": self.D.as_strings()}


@dataclass(frozen=True, eq=False)
class UlamMatrix:
    partition: Partition
    indptr: np.ndarray
    indices: np.ndarray      # 0-based row index j-1
    lo: np.ndarray
    hi: np.ndarray
    hole: Interval | None = None
    hole_rows: frozenset = frozenset()
    stochastic: bool = True
    partial_rows: frozenset = frozenset()
    n_branches: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def k(self) -> int:
        return self.partition.k

    @property
    def delta(self) -> Interval:
        return self.partition.delta

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * self.lo + 0.5 * self.hi

    @property
    def rad(self) -> np.ndarray:
        """Upper bounds on the distance from ``mid`` to either endpoint."""
        m = self.mid
        return np.maximum(add_dir(self.hi, -m, True), add_dir(m, -self.lo, True))

    def column_nnz(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row_nnz(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.k)

    def column_sums(self):
        """Directed (lower, upper) column sums."""
        return _col_sums(self.indptr, self.lo, False), _col_sums(self.indptr, self.hi, True)

    def entry(self, j: int, i: int) -> Interval:
        """Entry (j, i), 1-based."""
        s, e = self.indptr[i - 1], self.indptr[i]
        rows = self.indices[s:e]
        hit = np.nonzero(rows == j - 1)[0]
        if hit.size == 0:
            return Interval(0.0)
        p = s + hit[0]
        return Interval(float(self.lo[p]), float(self.hi[p]))

    def to_dense(self, which: str = "mid") -> np.ndarray:
        vals = {"lo": self.lo, "hi": self.hi, "mid": self.mid}[which]
        out = np.zeros((self.k, self.k))
        cols = np.repeat(np.arange(self.k), self.column_nnz())
        out[self.indices, cols] = vals
        return out

    def to_scipy(self, which: str = "mid"):
        from scipy.sparse import csc_matrix
        vals = {"lo": self.lo, "hi": self.hi, "mid": self.mid}[which]
        return csc_matrix((vals, self.indices, self.indptr), shape=(self.k, self.k))

    @classmethod
    def from_dense(cls, lo, hi=None, hole=None) -> "UlamMatrix":
        """Matrix from dense entry bounds (mostly for tests and small examples)."""
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 2 or lo.shape[0] != lo.shape[1]:
            raise ValueError("need two square arrays of equal shape")
        if np.any(lo > hi) or np.any(lo < 0):
            raise ValueError("entries must satisfy 0 <= lo <= hi")
        k = lo.shape[0]
        mask = hi.T != 0           # column-major traversal
        cols, rows = np.nonzero(mask)
        indptr = np.concatenate([[0], np.cumsum(mask.sum(axis=1))]).astype(np.int64)
        iv = None if hole is None else Interval(*hole)
        return cls(Partition(k), indptr, rows.astype(np.int64), lo[rows, cols].copy(),
                   hi[rows, cols].copy(), hole=iv, stochastic=hole is None)

    # export ---------------------------------------------------------------
    def export(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(export_text(self))

    @classmethod
    def read(cls, path) -> "UlamMatrix":
        with open(path, encoding="utf-8") as fh:
            return parse_export(fh.read())


def export_text(u: UlamMatrix) -> str:
    hole = "none" if u.hole is None else f"{u.hole.lo!r},{u.hole.hi!r}"
    lines = [f"ulam k={u.k} hole={hole}"]
    cols = np.repeat(np.arange(u.k), u.column_nnz())
    for j, i, a, b in zip(u.indices.tolist(), cols.tolist(), u.lo.tolist(), u.hi.tolist()):
        lines.append(f"{j + 1} {i + 1} {a!r} {b!r}")
    return "\n".join(lines) + "\n"


def parse_export(text: str) -> UlamMatrix:
    lines = text.strip().splitlines()
    head = lines[0].split()
    if head[0] != "ulam":
        raise ValueError("not an Ulam matrix export")
    fields = dict(item.split("=", 1) for item in head[1:])
    k = int(fields["k"])
    hole = None
    if fields["hole"] != "none":
        a, b = fields["hole"].split(",")
        hole = Interval(float(a), float(b))
    rows, cols, lo, hi = [], [], [], []
    for line in lines[1:]:
        j, i, a, b = line.split()
        rows.append(int(j) - 1)
        cols.append(int(i) - 1)
        lo.append(float(a))
        hi.append(float(b))
    rows, cols = np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64)
    order = np.lexsort((rows, cols))
    indptr = np.zeros(k + 1, dtype=np.int64)
    np.add.at(indptr, cols + 1, 1)
    indptr = np.cumsum(indptr)
    closed = hole is None
    return UlamMatrix(Partition(k), indptr, rows[order], np.array(lo)[order],
                      np.array(hi)[order], hole=hole, stochastic=closed)


def _col_sums(indptr, vals, upward: bool) -> np.ndarray:
    """Column sums of nonnegative entries, widened by the summation error."""
    counts = np.diff(indptr)
    sums = np.add.reduceat(vals, indptr[:-1]) if vals.size else np.zeros(len(counts))
    sums = np.where(counts == 0, 0.0, sums)
    g = np.array([R.gamma(int(c)) if c > 1 else 0.0 for c in counts]) if counts.size < 64 \
        else _gamma_vec(counts)
    if upward:
        return np.where(counts > 1, mul_dir(sums, 1.0 + g, True), sums)
    return np.where(counts > 1, np.maximum(mul_dir(sums, 1.0 - g, False), 0.0), sums)


def _gamma_vec(counts):
    nu = counts.astype(float) * U
    return np.nextafter(nu / (1.0 - nu), np.inf) * 1.0000001


# -- assembly ---------------------------------------------------------------

def _branch_pieces(b: Branch, k: int, grid_lo, grid_hi):
    """(row, col, lo, hi) contributions of one branch, 0-based indices."""
    c_lo, c_hi = b.clipped_roots(grid_lo, grid_hi)
    if b.increasing:
        oa, ob = c_lo[:-1], c_hi[1:]
        ia, ib = c_hi[:-1], c_lo[1:]
    else:
        oa, ob = c_lo[1:], c_hi[:-1]
        ia, ib = c_hi[1:], c_lo[:-1]
    img = b.image
    rows = np.arange(k)
    # I_j certainly below or above the image contributes nothing
    keep = ~((grid_hi[1:] <= img.lo) | (grid_lo[:-1] >= img.hi))
    rows, oa, ob, ia, ib = rows[keep], oa[keep], ob[keep], ia[keep], ib[keep]
    first = np.clip(np.floor(oa * k).astype(np.int64), 0, k - 1)
    last = np.clip(np.ceil(ob * k).astype(np.int64) - 1, 0, k - 1)
    last = np.maximum(last, first)
    count = last - first + 1
    r = np.repeat(rows, count)
    offs = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
    c = np.repeat(first, count) + offs
    cell_lo = c / k          # exact for powers of two; widened below otherwise
    cell_hi = (c + 1) / k
    if k & (k - 1):
        cell_lo = np.nextafter(cell_lo, -np.inf)
        cell_hi_in = np.nextafter(cell_hi, -np.inf)
        cell_lo_in = np.nextafter(c / k, np.inf)
        cell_hi = np.nextafter(cell_hi, np.inf)
    else:
        cell_lo_in, cell_hi_in = cell_lo, cell_hi
    OA, OB = np.repeat(oa, count), np.repeat(ob, count)
    IA, IB = np.repeat(ia, count), np.repeat(ib, count)
    up = add_dir(np.minimum(OB, cell_hi), -np.maximum(OA, cell_lo), True)
    dn = add_dir(np.minimum(IB, cell_hi_in), -np.maximum(IA, cell_lo_in), False)
    kf = float(k)
    up = np.minimum(mul_dir(np.maximum(up, 0.0), kf, True), 1.0)
    dn = np.minimum(np.maximum(mul_dir(np.maximum(dn, 0.0), kf, False), 0.0), up)
    nz = up > 0
    return r[nz], c[nz], dn[nz], up[nz]


def build_ulam(m: PiecewiseMap, k: int, check: bool = True) -> UlamMatrix:
    """Certified enclosure of the Ulam matrix of ``m`` on k cells."""
    part = Partition(k)
    g_lo, g_hi = part.grid()
    parts = [_branch_pieces(b, k, g_lo, g_hi) for b in m.branches]
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    lo = np.concatenate([p[2] for p in parts])
    hi = np.concatenate([p[3] for p in parts])
    indptr, idx, lo, hi = _aggregate(k, rows, cols, lo, hi)
    u = UlamMatrix(part, indptr, idx, lo, hi, n_branches=m.n_branches)
    if check:
        s_lo, s_hi = u.column_sums()
        bad = np.nonzero((s_lo > 1.0) | (s_hi < 1.0))[0]
        if bad.size:
            i = int(bad[0])
            raise AssemblyError(
                f"column {i + 1} sum [{s_lo[i]!r}, {s_hi[i]!r}] excludes 1")
    return u


def _aggregate(k, rows, cols, lo, hi):
    order = np.lexsort((rows, cols))
    rows, cols, lo, hi = rows[order], cols[order], lo[order], hi[order]
    key = cols * k + rows
    starts = np.concatenate([[0], np.nonzero(np.diff(key))[0] + 1]) if key.size else np.zeros(0, int)
    cnt = np.diff(np.concatenate([starts, [key.size]]))
    lo_s = np.add.reduceat(lo, starts) if key.size else lo
    hi_s = np.add.reduceat(hi, starts) if key.size else hi
    dup = cnt > 1
    if dup.any():
        g = _gamma_vec(cnt)
        lo_s = np.where(dup, np.maximum(mul_dir(lo_s, 1.0 - g, False), 0.0), lo_s)
        hi_s = np.where(dup, np.minimum(mul_dir(hi_s, 1.0 + g, True), 1.0), hi_s)
    r = rows[starts]
    c = cols[starts]
    indptr = np.zeros(k + 1, dtype=np.int64)
    np.add.at(indptr, c + 1, 1)
    return np.cumsum(indptr), r.astype(np.int64), lo_s, hi_s


# -- hole -------------------------------------------------------------------

def _aligned(x: float, k: int) -> bool:
    v = x * k
    return v == math.floor(v)


def suggest_aligned_hole(h: Hole, k: int):
    lo = math.floor(h.interval.lo * k) / k
    hi = math.ceil(h.interval.hi * k) / k
    return lo, hi


def apply_hole_mask(u: UlamMatrix, h: Hole | None, strict: bool = True) -> UlamMatrix:
    """Zero the rows of cells inside the hole (mass landing in H is lost).

    In strict mode the hole endpoints must be grid points.  Otherwise rows of
    cells that only partly overlap the hole keep their upper bounds but get
    lower bound 0, which still encloses the holed operator.
    """
    if h is None:
        return u
    k = u.k
    iv = h.interval
    if iv.hi <= iv.lo:
        return u
    aligned = h.exact and _aligned(iv.lo, k) and _aligned(iv.hi, k)
    if strict and not aligned:
        lo, hi = suggest_aligned_hole(h, k)
        raise ConfigError(
            f"hole [{iv.lo!r}, {iv.hi!r}] is not aligned with the grid of k={k} cells; "
            f"nearest aligned hole is [{lo!r}, {hi!r}]")
    j = np.arange(k)
    cell_lo, cell_hi = j / k, (j + 1) / k
    # inner enclosure of H: shrink by one ulp unless the endpoints are exact
    in_lo = iv.lo if h.exact else np.nextafter(iv.lo, np.inf)
    in_hi = iv.hi if h.exact else np.nextafter(iv.hi, -np.inf)
    inside = (cell_lo >= in_lo) & (cell_hi <= in_hi)
    partial = ~inside & (cell_hi > iv.lo) & (cell_lo < iv.hi)
    keep = ~inside[u.indices]
    lo = np.where(partial[u.indices], 0.0, u.lo)
    cols = np.repeat(np.arange(k), u.column_nnz())
    cols, rows, lo, hi = cols[keep], u.indices[keep], lo[keep], u.hi[keep]
    indptr = np.zeros(k + 1, dtype=np.int64)
    np.add.at(indptr, cols + 1, 1)
    return replace(u, indptr=np.cumsum(indptr), indices=rows, lo=lo, hi=hi, hole=iv,
                   hole_rows=frozenset((np.nonzero(inside)[0] + 1).tolist()),
                   partial_rows=frozenset((np.nonzero(partial)[0] + 1).tolist()),
                   stochastic=False)


# -- approximation inequality -------------------------------------------------

def approx_coefficients(ly: LYCertificate) -> ApproxCoefficients:
    """C = (A lam1 + 1) A / (1 - lam1), D = B (A lam1 + 2)."""
    A, lam, B = ly.A, ly.lambda1, ly.B
    if not lam.hi < 1:
        raise ExpansionTooWeak(f"lambda1 <= {lam.hi!r} is not < 1")
    one = Interval(1.0)
    C = (A * lam + one) * A / (one - lam)
    D = B * (A * lam + Interval(2.0))
    return ApproxCoefficients(C, D)


# -- norms of cell-average vectors --------------------------------------------

def l1_norm(v, k: int) -> float:
    """Upper bound on ||v||_1 = (1/k) sum |v_i|."""
    s = float(np.sum(np.abs(v)))
    return R.mul_up(R.mul_up(s, 1.0 + R.gamma(len(v))), R.div_up(1.0, float(k)))


def bv_norm(v) -> float:
    """Strong norm of a piecewise-constant density (variation plus boundary
    jumps), as a float estimate."""
    v = np.asarray(v, dtype=float)
    return float(np.sum(np.abs(np.diff(v))) + abs(v[0]) + abs(v[-1]))
