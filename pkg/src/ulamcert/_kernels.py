"""Hot loop of the contraction search: iterate every basis vector.

Two interchangeable backends compute, for each requested cell i and each
step n = 1..N, the float sum  sum_j |(M^n e_i k)_j - w_j|  with M the
midpoint matrix in CSC form.  The numba backend runs one basis vector per
parallel task (so results do not depend on the thread count); the fallback
uses scipy.sparse block products.  Set ULAMCERT_NO_NUMBA=1 to force the
fallback.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

# numba probes TBB first and warns when the installed one is too old
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

_DISABLED = os.environ.get("ULAMCERT_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


if HAVE_NUMBA:
    @njit(parallel=True, cache=True, fastmath=False)
    def _basis_norms_nb(indptr, indices, data, cols, nsteps, w, scale):
        k = indptr.size - 1
        nb = cols.size
        out = np.empty((nb, nsteps))
        for b in prange(nb):
            v = np.zeros(k)
            y = np.zeros(k)
            v[cols[b]] = scale
            for n in range(nsteps):
                for i in range(k):
                    y[i] = 0.0
                for c in range(k):
                    x = v[c]
                    if x != 0.0:
                        for p in range(indptr[c], indptr[c + 1]):
                            y[indices[p]] += data[p] * x
                s = 0.0
                for i in range(k):
                    s += abs(y[i] - w[i])
                out[b, n] = s
                for i in range(k):
                    v[i] = y[i]
        return out

    @njit(cache=True, fastmath=False)
    def _matvec_nb(indptr, indices, data, x):
        k = indptr.size - 1
        y = np.zeros(k)
        for c in range(k):
            xc = x[c]
            if xc != 0.0:
                for p in range(indptr[c], indptr[c + 1]):
                    y[indices[p]] += data[p] * xc
        return y


def _basis_norms_np(indptr, indices, data, cols, nsteps, w, scale, block=256):
    from scipy.sparse import csc_matrix
    k = indptr.size - 1
    A = csc_matrix((data, indices, indptr), shape=(k, k))
    out = np.empty((cols.size, nsteps))
    for s in range(0, cols.size, block):
        c = cols[s:s + block]
        V = np.zeros((k, c.size))
        V[c, np.arange(c.size)] = scale
        for n in range(nsteps):
            V = A @ V
            out[s:s + c.size, n] = np.abs(V - w[:, None]).sum(axis=0)
    return out


def basis_norms(indptr, indices, data, cols, nsteps: int, w, scale: float,
                backend: str | None = None) -> np.ndarray:
    """Array (len(cols), nsteps) of float sums |M^n (scale e_i) - w|."""
    backend = backend or BACKEND
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    data = np.ascontiguousarray(data, dtype=np.float64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if nsteps <= 0 or cols.size == 0:
        return np.zeros((cols.size, max(nsteps, 0)))
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _basis_norms_nb(indptr, indices, data, cols, int(nsteps), w, float(scale))
    return _basis_norms_np(indptr, indices, data, cols, int(nsteps), w, float(scale))


def matvec(indptr, indices, data, x, backend: str | None = None) -> np.ndarray:
    """Float product of a CSC matrix with a vector (column-order scatter)."""
    backend = backend or BACKEND
    x = np.ascontiguousarray(x, dtype=np.float64)
    if backend == "numba" and HAVE_NUMBA:
        return _matvec_nb(np.asarray(indptr, np.int64), np.asarray(indices, np.int64),
                          np.asarray(data, np.float64), x)
    from scipy.sparse import csc_matrix
    k = len(indptr) - 1
    return csc_matrix((data, indices, indptr), shape=(k, k)) @ x


def set_threads(n: int | None) -> int:
    """Cap the worker count; returns the count in effect (1 without numba)."""
    if not HAVE_NUMBA:
        return 1
    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
