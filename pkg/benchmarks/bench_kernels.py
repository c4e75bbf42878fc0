"""Time the basis-iteration kernel with the numba and the scipy backend.

    python3 benchmarks/bench_kernels.py [--k 8192] [--steps 12] [--repeat 3]

Both backends run on the same Ulam matrix (Lanford map, F = T^2) and must
agree to rounding; the largest relative difference is printed.
"""
import argparse
import time
import warnings

import numpy as np

warnings.filterwarnings("ignore", category=Warning, module="numba")

from ulamcert import _kernels
from ulamcert.contraction import fixed_point
from ulamcert.dynamics import iterate_map, mod1_map
from ulamcert.ulam import build_ulam


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--k", type=int, default=8192)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    F = iterate_map(mod1_map("2*x + 0.5*x*(1-x)"), 2)
    u = build_ulam(F, args.k)
    w = fixed_point(u)
    cols = np.arange(u.k)
    run = lambda backend: _kernels.basis_norms(u.indptr, u.indices, u.mid, cols, args.steps,
                                               w, float(u.k), backend)

    print(f"k={u.k} nnz={u.nnz} steps={args.steps}")
    results = {}
    if _kernels.HAVE_NUMBA:
        run("numba")  # compile (or load the cache) outside the timing
        t, results["numba"] = timed(lambda: run("numba"), args.repeat)
        print(f"numba   {t:8.3f} s  threads={_kernels.set_threads(None)}")
    else:
        print("numba   unavailable (ULAMCERT_NO_NUMBA set or not installed)")
    t, results["numpy"] = timed(lambda: run("numpy"), args.repeat)
    print(f"numpy   {t:8.3f} s")
    if len(results) == 2:
        a, b = results["numba"], results["numpy"]
        rel = np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))
        print(f"max relative difference {rel:.3e}")


if __name__ == "__main__":
    main()
