"""Time the compiled residual kernel against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from longimpute import _kernels_py
from longimpute.basis import TimeGrid, default_basis
from longimpute.data import SparseMatrix

try:
    from longimpute._ext import _ckernels
except ImportError:
    _ckernels = None


def problem(n, T, K, density, seed=0):
    rng = np.random.default_rng(seed)
    mask = rng.random((n, T)) < density
    Y = SparseMatrix.from_dense(rng.standard_normal((n, T)), mask)
    B = default_basis(TimeGrid(0, 1, T), K).values
    W = rng.standard_normal((n, K))
    return Y, B, W


def bench_kernel(repeat):
    print(f"{'N':>7} {'T':>4} {'K':>3} {'nnz':>9} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for n, T, K, dens in [(500, 51, 7, 0.1), (5000, 51, 7, 0.1), (20000, 101, 10, 0.05), (50000, 51, 7, 0.2)]:
        Y, B, W = problem(n, T, K, dens)
        args = (Y.indptr, Y.cols, Y.values, W, B)
        py = min(timeit.repeat(lambda: _kernels_py.residual_update(*args), number=1, repeat=repeat)) * 1e3
        if _ckernels is None:
            cy, ratio = float("nan"), float("nan")
        else:
            a, b = _kernels_py.residual_update(*args), _ckernels.residual_update(*args)
            assert np.allclose(a[0], b[0]) and np.isclose(a[1], b[1])
            cy = min(timeit.repeat(lambda: _ckernels.residual_update(*args), number=1, repeat=repeat)) * 1e3
            ratio = py / cy
        print(f"{n:>7} {T:>4} {K:>3} {Y.nnz:>9} {py:>10.3f} {cy:>10.3f} {ratio:>8.2f}")


FIT_SNIPPET = """
import time, numpy as np
from longimpute import _kernels
from longimpute.basis import TimeGrid, default_basis
from longimpute.completion import soft_impute
from longimpute.data import SparseMatrix
rng = np.random.default_rng(0)
mask = rng.random((20000, 51)) < 0.1
Y = SparseMatrix.from_dense(rng.standard_normal((20000, 51)), mask)
B = default_basis(TimeGrid(0, 1, 51), 7).values
t = time.perf_counter()
soft_impute(Y, B, None, max_iter=100)
print(_kernels.BACKEND, round(time.perf_counter() - t, 3))
"""


def bench_fit():
    # backend is fixed at import, so each run gets a fresh interpreter
    print("\nsoft_impute, default path, N=20000 T=51 K=7, 10% observed (seconds)")
    for pure in ("1", "0"):
        env = dict(os.environ, LONGIMPUTE_PURE=pure)
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET], env=env, capture_output=True, text=True)
        print(" ", out.stdout.strip() or out.stderr.strip().splitlines()[-1])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ns = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the python backend is timed")
    bench_kernel(ns.repeat)
    bench_fit()
