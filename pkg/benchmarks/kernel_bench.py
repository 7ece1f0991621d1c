#!/usr/bin/env python3
"""Kernel backend comparison: numba-jitted loops against the numpy fallback.

Times the four hot kernels (SpGEMM, CSR-dense matmul, SDDMM, batched BFS)
on Erdos-Renyi graphs of increasing size under both backends and prints a
table with the speedup ratio. JIT compilation happens in an untimed warmup
pass so the numbers reflect steady-state cost.

Usage:
  python benchmarks/kernel_bench.py [--sizes 1000 4000 16000] [--degree 10]
                                    [--features 64] [--repeats 5] [--json out]
"""

import argparse
import json
import sys
import time

import numpy as np

from adaptcs import kernels
from adaptcs.backend import NUMBA_IMPORTABLE, set_backend
from adaptcs.search import SearchConfig, scs
from adaptcs.sparse import matmul_dense, spgemm, sym_normalize
from adaptcs.synth import er_graph, random_unit_embeddings


def build_case(n: int, degree: float, n_features: int, seed: int):
    g = er_graph(n, min(degree / max(n - 1, 1), 1.0), seed=seed)
    a = sym_normalize(g.adj)
    x = np.random.default_rng(seed + 1).normal(size=(n, n_features))
    emb = random_unit_embeddings(n, n_features, seed=seed + 2)
    return g, a, x, emb


def kernel_suite(g, a, x, emb):
    cfg = SearchConfig(k_size=30, tau_sign=-1.0)
    return {
        "spgemm": lambda: spgemm(a, a),
        "spmm": lambda: matmul_dense(a, x),
        "sddmm": lambda: kernels.sddmm(a.shape, a.indptr, a.indices, x, x),
        "bfs": lambda: kernels.bfs_distances(g.n, g.adj.indptr, g.adj.indices, 0),
        "scs_query": lambda: scs(g, emb, 0, cfg),
    }


def time_fn(fn, repeats: int) -> float:
    fn()  # warmup (JIT compile and cache fill)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, degree, n_features, repeats):
    backends = ["numpy"] + (["numba"] if NUMBA_IMPORTABLE else [])
    rows = []
    for n in sizes:
        g, a, x, emb = build_case(n, degree, n_features, seed=0)
        for name in kernel_suite(g, a, x, emb):
            row = {"n": n, "m": g.m, "kernel": name}
            for backend in backends:
                set_backend(backend)
                row[backend] = time_fn(kernel_suite(g, a, x, emb)[name], repeats)
            if "numba" in row:
                row["speedup"] = row["numpy"] / row["numba"] if row["numba"] > 0 else float("inf")
            rows.append(row)
    set_backend("auto")
    return rows


def print_table(rows):
    have_numba = any("numba" in r for r in rows)
    header = f"{'n':>8} {'m':>9} {'kernel':<10} {'numpy (s)':>12}"
    if have_numba:
        header += f" {'numba (s)':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for r in rows:
        line = f"{r['n']:>8} {r['m']:>9} {r['kernel']:<10} {r['numpy']:>12.6f}"
        if "numba" in r:
            line += f" {r['numba']:>12.6f} {r['speedup']:>7.2f}x"
        print(line)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000, 16000])
    parser.add_argument("--degree", type=float, default=10.0,
                        help="target mean degree of the random graphs")
    parser.add_argument("--features", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--json", help="also dump rows as JSON to this path")
    args = parser.parse_args(argv)

    if not NUMBA_IMPORTABLE:
        print("numba not importable; timing the numpy fallback only", file=sys.stderr)
    rows = run(args.sizes, args.degree, args.features, args.repeats)
    print_table(rows)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
