#!/usr/bin/env python3
"""Benchmark the two kernel builds against each other.

Measures the dense and CSR matrix-vector products (numba row loop vs the
numpy fallback) and a full iteration-capped solve on a large sparse
problem.  The solve comparison re-executes this script in a subprocess
with CGKIT_DISABLE_NUMBA=1 so each lane runs exactly the code path users
get.

Usage:
    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --dense-sizes 200,1000 --repeats 20
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cgkit import MatrixSPD, QuadraticProblem, SolverConfig, solve
from cgkit import kernels
from cgkit.problems_io import BuiltinProblemSpec, builtin_problem


def best_of(fn, repeats: int) -> float:
    fn()  # warm-up (jit compile, caches)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dense(sizes, repeats):
    print("dense matvec: numba row loop vs numpy (BLAS)")
    print(f"{'n':>8} {'numba':>12} {'numpy':>12} {'numba/numpy':>12}")
    rng = np.random.default_rng(0)
    for n in sizes:
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2
        x = rng.standard_normal(n)
        t_numpy = best_of(lambda: kernels.dense_matvec_numpy(a, x), repeats)
        if kernels.dense_matvec_numba is not None:
            t_numba = best_of(lambda: kernels.dense_matvec_numba(a, x), repeats)
            ratio = f"{t_numba / t_numpy:12.2f}"
            t_numba_txt = f"{t_numba * 1e6:10.1f}us"
        else:
            t_numba_txt, ratio = "n/a", "n/a"
        print(f"{n:>8} {t_numba_txt:>12} {t_numpy * 1e6:10.1f}us {ratio:>12}")


def laplacian_csr(n):
    problem = builtin_problem(BuiltinProblemSpec(family="laplacian1d", n=n))
    return problem


def bench_csr(sizes, repeats):
    print("\ncsr matvec (1-D Laplacian): numba row loop vs numpy (bincount)")
    print(f"{'n':>8} {'nnz':>9} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for n in sizes:
        problem = laplacian_csr(n)
        indptr, indices, data = problem.A.csr_arrays
        x = np.random.default_rng(1).standard_normal(n)
        t_numpy = best_of(
            lambda: kernels.csr_matvec_numpy(indptr, indices, data, x), repeats)
        if kernels.csr_matvec_numba is not None:
            t_numba = best_of(
                lambda: kernels.csr_matvec_numba(indptr, indices, data, x),
                repeats)
            speedup = f"{t_numpy / t_numba:8.2f}x"
            t_numba_txt = f"{t_numba * 1e6:10.1f}us"
        else:
            t_numba_txt, speedup = "n/a", "n/a"
        print(f"{n:>8} {problem.A.nnz:>9} {t_numba_txt:>12} "
              f"{t_numpy * 1e6:10.1f}us {speedup:>9}")


def timed_solve(n, iterations) -> float:
    problem = laplacian_csr(n)
    config = SolverConfig(max_iterations=iterations, record_trace=False)
    solve(problem, config=config)  # warm-up
    t0 = time.perf_counter()
    solve(problem, config=config)
    return time.perf_counter() - t0


def bench_solve(n, iterations):
    lane = "numba" if kernels.NUMBA_ENABLED else "numpy"
    mine = timed_solve(n, iterations)
    print(f"\nfull solve, 1-D Laplacian n={n}, {iterations} iterations")
    print(f"  {lane} build: {mine:.3f} s")
    if not kernels.NUMBA_ENABLED:
        return
    env = dict(os.environ, CGKIT_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, __file__, "--solve-only", str(n), str(iterations)],
        env=env, capture_output=True, text=True)
    if out.returncode != 0:
        print(f"  numpy build: failed ({out.stderr.strip()})")
        return
    other = float(out.stdout.strip())
    print(f"  numpy build: {other:.3f} s")
    print(f"  speedup: {other / mine:.2f}x")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dense-sizes", default="200,1000")
    parser.add_argument("--csr-sizes", default="10000,200000")
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--solve-n", type=int, default=100000)
    parser.add_argument("--solve-iters", type=int, default=300)
    parser.add_argument("--skip-solve", action="store_true")
    parser.add_argument("--solve-only", nargs=2, metavar=("N", "ITERS"),
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.solve_only:
        print(timed_solve(int(args.solve_only[0]), int(args.solve_only[1])))
        return 0

    print(f"active kernel build: {'numba' if kernels.NUMBA_ENABLED else 'numpy'}")
    bench_dense([int(s) for s in args.dense_sizes.split(",")], args.repeats)
    bench_csr([int(s) for s in args.csr_sizes.split(",")], args.repeats)
    if not args.skip_solve:
        bench_solve(args.solve_n, args.solve_iters)
    return 0


if __name__ == "__main__":
    sys.exit(main())
