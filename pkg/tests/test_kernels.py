"""Backend selection and numba/numpy kernel agreement."""

import os
import subprocess
import sys

import numpy as np
import pytest

from qsdual.grid import ModelParams, build_grid
from qsdual.kernels import BACKEND, numba_kernels, numpy_kernels

needs_numba = pytest.mark.skipif(numba_kernels is None, reason="numba unavailable")


def _geometry(n=32):
    grid = build_grid(ModelParams(N=4, m=2, p=3.0, lam=1.0), 8.0, n)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(grid.shape)
    return grid, v


@needs_numba
def test_laplacian_backends_bitwise_equal():
    grid, v = _geometry()
    hinv2 = 1.0 / (grid.h * grid.h)
    args = (v, grid.face_factors[0], grid.inv_node_factors[0], grid.face_factors[1], grid.inv_node_factors[1], hinv2)
    a = numpy_kernels.laplacian_2d(*args)
    b = numba_kernels.laplacian_2d(*args)
    assert np.array_equal(a, b)  # per-element float sequences are identical


@needs_numba
def test_laplacian_3d_backends_agree():
    grid = build_grid(ModelParams(N=6, m=2, p=3.0, lam=1.0), 8.0, 20)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(grid.shape)
    hinv2 = 1.0 / (grid.h * grid.h)
    args = (
        v,
        grid.face_factors[0],
        grid.inv_node_factors[0],
        grid.face_factors[1],
        grid.inv_node_factors[1],
        grid.face_factors[2],
        grid.inv_node_factors[2],
        hinv2,
    )
    a = numpy_kernels.laplacian_3d(*args)
    b = numba_kernels.laplacian_3d(*args)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


@needs_numba
def test_gradsq_backends_agree():
    grid, v = _geometry()
    g = v * v
    args = (v, g, 0.0, grid.face_factors[0], grid.node_factors[0], grid.face_factors[1], grid.node_factors[1])
    a = numpy_kernels.gradsq_2d(*args)
    b = numba_kernels.gradsq_2d(*args)
    assert abs(a - b) <= 1e-12 * abs(a)  # reduction order differs, values agree


def test_env_flag_selects_backend():
    code = "import qsdual.kernels as k; print(k.BACKEND)"
    for choice in ("numpy",) + (("numba",) if numba_kernels is not None else ()):
        env = dict(os.environ, QSDUAL_BACKEND=choice)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == choice


def test_env_flag_rejects_unknown():
    env = dict(os.environ, QSDUAL_BACKEND="fortran")
    out = subprocess.run(
        [sys.executable, "-c", "import qsdual.kernels"], env=env, capture_output=True, text=True
    )
    assert out.returncode != 0
    assert "QSDUAL_BACKEND" in out.stderr


def test_default_backend_is_reported():
    assert BACKEND in ("numba", "numpy")


def test_benchmark_module_runs():
    sys.path.insert(0, "benchmarks")
    try:
        import bench_kernels

        rows = bench_kernels.bench(32, repeat=2)
    finally:
        sys.path.pop(0)
    assert len(rows) >= 1
    assert all(len(r) == 4 for r in rows)
