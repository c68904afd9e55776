#!/usr/bin/env python3
"""Benchmark the weighted demeaning kernel: compiled extension vs numpy.

Builds a synthetic gravity-panel grouping structure (exporter-year,
importer-year, directed pair) at a configurable scale, then times the
alternating-projection sweep loop under both backends on identical
inputs and reports the speedup.  Results also cross-check that the two
implementations produce the same transform.

Run from the repository root:

    python3 benchmarks/bench_demean.py
    python3 benchmarks/bench_demean.py --countries 120 --years 40 --repeats 7
"""

import argparse
import time

import numpy as np

from cugravity._kernels import BACKEND, demean_inplace, demean_inplace_np


def make_problem(countries, years, cols, seed):
    """Random columns plus the three grouping dimensions of a full panel."""
    rng = np.random.default_rng(seed)
    directed = np.array(
        [(a, b) for a in range(countries) for b in range(countries) if a != b],
        dtype=np.int64,
    )
    t = np.arange(years, dtype=np.int64)
    exporter_year = (directed[:, 0:1] * years + t[None, :]).ravel()
    importer_year = (directed[:, 1:2] * years + t[None, :]).ravel()
    pair = np.repeat(np.arange(directed.shape[0], dtype=np.int64), years)
    n = pair.shape[0]
    x = rng.normal(size=(n, cols))
    w = np.exp(rng.normal(size=n))  # Poisson-style weight spread
    ids = [exporter_year, importer_year, pair]
    counts = [countries * years, countries * years, directed.shape[0]]
    return x, w, ids, counts


def bench(kernel, x, w, ids, counts, tol, repeats):
    best = np.inf
    sweeps = None
    out = None
    for _ in range(repeats):
        work = np.ascontiguousarray(x.copy())
        start = time.perf_counter()
        sweeps = kernel(work, w, ids, counts, tol, 10000)
        best = min(best, time.perf_counter() - start)
        out = work
    return best, sweeps, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--countries", type=int, default=80)
    parser.add_argument("--years", type=int, default=30)
    parser.add_argument("--cols", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--tol", type=float, default=1e-10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    x, w, ids, counts = make_problem(args.countries, args.years, args.cols, args.seed)
    n, k = x.shape
    print(
        f"problem: {n:,} rows x {k} cols; groups "
        f"{counts[0]:,} + {counts[1]:,} + {counts[2]:,}; tol {args.tol:g}"
    )
    print(f"active backend at import: {BACKEND}")

    results = {}
    numpy_time, sweeps, numpy_out = bench(
        demean_inplace_np, x, w, ids, counts, args.tol, args.repeats
    )
    results["numpy"] = numpy_time
    print(f"numpy fallback : {numpy_time * 1e3:9.2f} ms  ({sweeps} sweeps)")

    if demean_inplace is demean_inplace_np:
        print("compiled kernel: not built (pip install -e . rebuilds it); nothing to compare")
        return

    compiled_time, sweeps, compiled_out = bench(
        demean_inplace, x, w, ids, counts, args.tol, args.repeats
    )
    results["cython"] = compiled_time
    print(f"compiled kernel: {compiled_time * 1e3:9.2f} ms  ({sweeps} sweeps)")

    gap = np.abs(compiled_out - numpy_out).max()
    print(f"max |difference| between backends: {gap:.3e}")
    print(f"speedup (numpy / compiled): {numpy_time / compiled_time:.2f}x")


if __name__ == "__main__":
    main()
