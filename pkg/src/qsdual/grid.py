"""Symmetry-reduced geometry: block-radial grids, quadrature, Laplacian.

Functions invariant under the block-orthogonal group O(m) x O(m) x O(N-2m)
acting on R^N = R^m x R^m x R^(N-2m) depend only on the block radii
(r1, r2, r3), so the whole computation lives on a small cell-centered tensor
grid in those radii.  The quadrature weight per cell carries the sphere-area
factors of each block; the Laplacian is discretized in divergence form
(1/r^(d-1)) D^-(r^(d-1) D^+), which is self-adjoint in the weighted inner
product and makes the discrete energy gradient exact.

Cell-centered nodes r_j = (j + 1/2) h keep every weight strictly positive and
avoid evaluating the (d-1)/r drift at r = 0; the zero flux through the axis
face is the even-reflection rule.  The outer boundary at r = L uses
homogeneous Dirichlet ghosts (decay at infinity); integrals over R^N are
truncated to the box, which is a documented limitation, not corrected for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ParameterError, ShapeError

SECTOR_UNRESTRICTED = "unrestricted"
SECTOR_ANTISYMMETRIC = "antisymmetric"
_SECTORS = (SECTOR_UNRESTRICTED, SECTOR_ANTISYMMETRIC)


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d; 1 for the empty zero-dim block."""
    if d == 0:
        return 1.0
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class ModelParams:
    """Problem parameters: ambient dimension, block dimension, exponent, mass."""

    N: int
    m: int
    p: float
    lam: float

    def __post_init__(self):
        if int(self.N) != self.N or int(self.m) != self.m:
            raise ParameterError("N and m must be integers")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "lam", float(self.lam))
        if self.N < 4:
            raise ParameterError(f"N must be at least 4, got N={self.N}")
        if not (2 <= self.m <= self.N / 2):
            raise ParameterError(f"m must be an integer in [2, N/2] = [2, {self.N / 2:g}], got m={self.m}")
        if self.N - 2 * self.m == 1:
            raise ParameterError(f"N-2m must not equal 1 (N={self.N}, m={self.m})")
        pmax = 4.0 + 4.0 / self.N
        if not (2.0 < self.p < pmax):
            raise ParameterError(f"p must lie in (2, 4+4/N) = (2, {pmax:g}), got p={self.p}")
        if not (self.lam > 0):
            raise ParameterError(f"lambda must be positive, got {self.lam}")

    @property
    def p_mass_critical(self) -> float:
        return 2.0 + 4.0 / self.N

    @property
    def p_max(self) -> float:
        return 4.0 + 4.0 / self.N

    def regime(self) -> str:
        """'subcritical' below p = 2+4/N, 'intermediate' from there up to 4+4/N."""
        return "subcritical" if self.p < self.p_mass_critical else "intermediate"

    def with_lam(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)


@dataclass(frozen=True, eq=False)
class ReducedGrid:
    """Cell-centered tensor grid in the active block radii with quadrature weights."""

    block_dims: tuple[int, int, int]
    L: float
    n: int
    h: float = field(repr=False)
    r: np.ndarray = field(repr=False)
    axis_dims: tuple[int, ...] = field(repr=False)
    weights: np.ndarray = field(repr=False)
    node_factors: tuple[np.ndarray, ...] = field(repr=False)
    inv_node_factors: tuple[np.ndarray, ...] = field(repr=False)
    face_factors: tuple[np.ndarray, ...] = field(repr=False)
    sigma_total: float = field(repr=False)

    @property
    def active_axes(self) -> int:
        return len(self.axis_dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.active_axes

    def same_geometry(self, other: "ReducedGrid") -> bool:
        return self.block_dims == other.block_dims and self.L == other.L and self.n == other.n

    def coord(self, axis: int) -> np.ndarray:
        """Node radii along one axis, shaped to broadcast over the grid."""
        sh = [1] * self.active_axes
        sh[axis] = self.n
        return self.r.reshape(sh)

    def radius_sq(self) -> np.ndarray:
        """r1^2 + r2^2 (+ r3^2) broadcast over the grid."""
        out = np.zeros(self.shape)
        for ax in range(self.active_axes):
            out = out + self.coord(ax) ** 2
        return out

    def zero_values(self) -> np.ndarray:
        return np.zeros(self.shape)


def build_grid(params: ModelParams, L: float, n: int) -> ReducedGrid:
    """Build the reduced grid for the given block structure.

    Two active axes when N = 2m, three otherwise (the third block has
    dimension N - 2m >= 2; N - 2m = 1 is rejected by ModelParams).
    """
    if not (L > 0):
        raise ParameterError(f"box length L must be positive, got {L}")
    if n < 16:
        raise ParameterError(f"points_per_axis n must be at least 16, got {n}")
    d3 = params.N - 2 * params.m
    block_dims = (params.m, params.m, d3)
    axis_dims = (params.m, params.m) if d3 == 0 else (params.m, params.m, d3)
    h = L / n
    r = (np.arange(n) + 0.5) * h
    sigma_total = sphere_area(params.m) ** 2 * sphere_area(d3)
    node_factors = tuple(r ** (d - 1) for d in axis_dims)
    inv_node_factors = tuple(1.0 / nf for nf in node_factors)
    face_factors = tuple(((np.arange(n) + 1.0) * h) ** (d - 1) for d in axis_dims)
    axes = len(axis_dims)
    # axis factors multiplied before the scalar so the array is exactly
    # swap-symmetric in floating point (d1 = d2 makes the factors identical)
    weights = np.ones((n,) * axes)
    for ax in range(axes):
        sh = [1] * axes
        sh[ax] = n
        weights = weights * node_factors[ax].reshape(sh)
    weights = weights * (sigma_total * h ** axes)
    return ReducedGrid(
        block_dims=block_dims,
        L=float(L),
        n=int(n),
        h=h,
        r=r,
        axis_dims=axis_dims,
        weights=weights,
        node_factors=node_factors,
        inv_node_factors=inv_node_factors,
        face_factors=face_factors,
        sigma_total=sigma_total,
    )


@dataclass
class Field:
    """Scalar function values on a ReducedGrid, tagged with a symmetry sector."""

    grid: ReducedGrid
    values: np.ndarray
    sector: str = SECTOR_UNRESTRICTED

    def __post_init__(self):
        if self.sector not in _SECTORS:
            raise ParameterError(f"unknown sector {self.sector!r}")
        if self.values.shape != self.grid.shape:
            raise ShapeError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.sector)

    def _combine_sector(self, other: "Field") -> str:
        if self.sector == other.sector == SECTOR_ANTISYMMETRIC:
            return SECTOR_ANTISYMMETRIC
        return SECTOR_UNRESTRICTED

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values, self._combine_sector(other))

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values, self._combine_sector(other))

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * c, self.sector)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values, self.sector)


def integrate(f: Field) -> float:
    """Weighted quadrature realizing the full-space integral on invariant integrands."""
    return float(np.sum(f.grid.weights * f.values))


def inner(a: Field, b: Field) -> float:
    """Weighted L2 inner product."""
    return float(np.sum(a.grid.weights * a.values * b.values))


def wnorm(a: Field) -> float:
    return math.sqrt(inner(a, a))


def integrate_values(grid: ReducedGrid, values: np.ndarray) -> float:
    return float(np.sum(grid.weights * values))


def laplacian(f: Field) -> Field:
    """Divergence-form block-radial Laplacian with Dirichlet outer ghosts."""
    g = f.grid
    hinv2 = 1.0 / (g.h * g.h)
    if g.active_axes == 2:
        out = kernels.active.laplacian_2d(
            f.values, g.face_factors[0], g.inv_node_factors[0], g.face_factors[1], g.inv_node_factors[1], hinv2
        )
    else:
        out = kernels.active.laplacian_3d(
            f.values,
            g.face_factors[0],
            g.inv_node_factors[0],
            g.face_factors[1],
            g.inv_node_factors[1],
            g.face_factors[2],
            g.inv_node_factors[2],
            hinv2,
        )
    return Field(g, out, f.sector)


def weighted_gradsq(f: Field, factor: np.ndarray | None = None, factor_ghost: float = 1.0) -> float:
    """Face-based sum of |grad f|^2 times an optional pointwise factor.

    With factor None this equals -<f, laplacian(f)> exactly (same face terms),
    so the discrete Dirichlet energy and the stencil are mutually consistent.
    The factor is averaged onto faces; the outer ghost uses factor_ghost.
    """
    g = f.grid
    pref = g.sigma_total * g.h ** g.active_axes / (g.h * g.h)
    vals = f.values
    fac = np.ones_like(vals) if factor is None else factor
    if g.active_axes == 2:
        s = kernels.active.gradsq_2d(
            vals, fac, factor_ghost, g.face_factors[0], g.node_factors[0], g.face_factors[1], g.node_factors[1]
        )
    else:
        s = kernels.active.gradsq_3d(
            vals,
            fac,
            factor_ghost,
            g.face_factors[0],
            g.node_factors[0],
            g.face_factors[1],
            g.node_factors[1],
            g.face_factors[2],
            g.node_factors[2],
        )
    return pref * s


def antisymmetrize(f: Field) -> Field:
    """Project onto the sector odd under swapping the first two block radii."""
    if f.values.shape[0] != f.values.shape[1]:
        raise ShapeError("antisymmetrize needs equal resolution on axes 1 and 2")
    v = f.values
    out = 0.5 * (v - np.swapaxes(v, 0, 1))
    return Field(f.grid, out, SECTOR_ANTISYMMETRIC)


def boundary_max(f: Field) -> float:
    """Largest |value| on the outer boundary ring (undersized-box detector)."""
    worst = 0.0
    for ax in range(f.grid.active_axes):
        sl = [slice(None)] * f.grid.active_axes
        sl[ax] = -1
        worst = max(worst, float(np.max(np.abs(f.values[tuple(sl)]))))
    return worst


# ---------------------------------------------------------------------------
# text dump format: header "N m p lambda L n axes sector", then one value per
# line in row-major axis order, shortest round-trip decimal (bit-exact reload)
# ---------------------------------------------------------------------------


def dump_field(f: Field, params: ModelParams, path) -> None:
    lines = [
        f"{params.N} {params.m} {params.p!r} {params.lam!r} {f.grid.L!r} {f.grid.n} {f.grid.active_axes} {f.sector}"
    ]
    lines.extend(repr(x) for x in f.values.ravel().tolist())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_field(path) -> tuple[Field, ModelParams]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 8:
            raise ShapeError(f"malformed field dump header in {path}")
        N, m = int(header[0]), int(header[1])
        p, lam, L = float(header[2]), float(header[3]), float(header[4])
        n, axes = int(header[5]), int(header[6])
        sector = header[7]
        params = ModelParams(N=N, m=m, p=p, lam=lam)
        grid = build_grid(params, L, n)
        if grid.active_axes != axes:
            raise ShapeError(f"dump declares {axes} axes but N={N}, m={m} gives {grid.active_axes}")
        values = np.fromiter((float(line) for line in fh), dtype=np.float64, count=n ** axes)
    return Field(grid, values.reshape(grid.shape), sector), params
