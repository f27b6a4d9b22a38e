"""Benchmark the numba kernels against the pure-numpy fallbacks.

Runs the three hot kernels (dual-map inversion, stencil Laplacian, weighted
gradient-square reduction) on solver-realistic array sizes and reports the
per-call time for both backends plus the speedup.  Usage:

    python benchmarks/bench_kernels.py [--sizes 128,256] [--repeat 200]

The selection env flag (QSDUAL_BACKEND) does not matter here; both
implementations are imported explicitly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qsdual.grid import ModelParams, build_grid
from qsdual.kernels import numba_kernels, numpy_kernels


def _time(fn, repeat: int) -> float:
    fn()  # warm up (numba compilation, cache effects)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench(n: int, repeat: int) -> list[tuple[str, float, float]]:
    params = ModelParams(N=4, m=2, p=3.0, lam=10.0)
    grid = build_grid(params, 8.0, n)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(grid.shape)
    g = v * v
    hinv2 = 1.0 / (grid.h * grid.h)
    f0, f1 = grid.face_factors
    i0, i1 = grid.inv_node_factors
    r0, r1 = grid.node_factors

    rows = []
    for name, kern in (("numpy", numpy_kernels), ("numba", numba_kernels)):
        if kern is None:
            continue
        t_inv = _time(lambda: kern.invert_antideriv(v, 1e-12, 100), repeat)
        t_lap = _time(lambda: kern.laplacian_2d(v, f0, i0, f1, i1, hinv2), repeat)
        t_grd = _time(lambda: kern.gradsq_2d(v, g, 0.0, f0, r0, f1, r1), repeat)
        rows.append((name, t_inv, t_lap, t_grd))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="128,256", help="comma-separated grid sizes per axis")
    ap.add_argument("--repeat", type=int, default=100)
    args = ap.parse_args()

    for n in (int(s) for s in args.sizes.split(",")):
        rows = bench(n, args.repeat)
        print(f"\n2D grid {n}x{n}, {args.repeat} calls each (seconds/call):")
        print(f"{'backend':8s} {'invert':>10s} {'laplacian':>10s} {'gradsq':>10s}")
        for name, t_inv, t_lap, t_grd in rows:
            print(f"{name:8s} {t_inv:10.2e} {t_lap:10.2e} {t_grd:10.2e}")
        if len(rows) == 2:
            base, fast = rows
            print(
                f"{'speedup':8s} {base[1] / fast[1]:9.1f}x {base[2] / fast[2]:9.1f}x {base[3] / fast[3]:9.1f}x"
            )


if __name__ == "__main__":
    main()
