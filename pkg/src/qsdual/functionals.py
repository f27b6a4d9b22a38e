"""Energies, mass constraint, gradients, multiplier, and residual.

The transformed (dual) energy of a field v is

    E(v) = 1/2 int |grad v|^2 - (1/p) int |g(v)|^p

with g the dual map, and the physical quasilinear energy of u = g(v) is

    Q(u) = 1/2 int |grad u|^2 + int |grad u|^2 u^2 - (1/p) int |u|^p.

The Dirichlet terms reuse the divergence-form face sums, so the reported
gradient is exactly the derivative of the discrete energy in the weighted
inner product (discrete consistency beats continuum fidelity for
optimization).  The power term evaluates |g|^(p-2) g as sign(g) |g|^(p-1)
to avoid 0^(negative) at nodes where g vanishes when p < 3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualmap import DualMap, deriv_from_mapped
from .errors import DegenerateInputError, NumericError
from .grid import Field, ModelParams, boundary_max, inner, integrate_values, laplacian, weighted_gradsq

CSV_COLUMNS = (
    "iter",
    "energy_I",
    "energy_J",
    "mass",
    "l2_of_v",
    "mu",
    "residual_norm",
    "projected_grad_norm",
    "step_size",
)


@dataclass
class Diagnostics:
    """Per-iterate convergence measurements; one CSV row per instance."""

    energy_I: float
    energy_J: float
    mass: float
    l2_of_v: float
    mu: float
    residual_norm: float
    projected_grad_norm: float
    iteration: int = 0
    step_size: float = 0.0

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.iteration),
                repr(self.energy_I),
                repr(self.energy_J),
                repr(self.mass),
                repr(self.l2_of_v),
                repr(self.mu),
                repr(self.residual_norm),
                repr(self.projected_grad_norm),
                repr(self.step_size),
            ]
        )


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def _power_term(mapped: np.ndarray, p: float) -> np.ndarray:
    return np.abs(mapped) ** p


def dual_energy(v: Field, dual: DualMap, params: ModelParams, mapped: np.ndarray | None = None) -> float:
    """Transformed energy of v (Dirichlet half minus the p-power well)."""
    if mapped is None:
        mapped = dual.map_values(v.values)
    val = 0.5 * weighted_gradsq(v) - integrate_values(v.grid, _power_term(mapped, params.p)) / params.p
    if not np.isfinite(val):
        raise NumericError("dual energy is not finite")
    return val


def quasilinear_energy(u: Field, params: ModelParams) -> float:
    """Physical energy of u, including the |grad u|^2 u^2 quasilinear term."""
    val = (
        0.5 * weighted_gradsq(u)
        + weighted_gradsq(u, u.values * u.values, 0.0)
        - integrate_values(u.grid, _power_term(u.values, params.p)) / params.p
    )
    if not np.isfinite(val):
        raise NumericError("quasilinear energy is not finite")
    return val


def mass_term(grid, mapped_or_values: np.ndarray, mu: float) -> float:
    """The -(mu/2) int w^2 addend shared by both constrained energy forms."""
    return -(mu / 2.0) * integrate_values(grid, mapped_or_values * mapped_or_values)


def dual_energy_constrained(v: Field, mu: float, dual: DualMap, params: ModelParams) -> float:
    """Dual energy plus the multiplier term -(mu/2) int g(v)^2."""
    mapped = dual.map_values(v.values)
    return dual_energy(v, dual, params, mapped) + mass_term(v.grid, mapped, mu)


def quasilinear_energy_constrained(u: Field, mu: float, params: ModelParams) -> float:
    """Quasilinear energy plus the multiplier term -(mu/2) int u^2."""
    return quasilinear_energy(u, params) + mass_term(u.grid, u.values, mu)


def mass(v: Field, dual: DualMap, mapped: np.ndarray | None = None) -> float:
    """Constrained mass int g(v)^2 (the quantity prescribed to equal lambda)."""
    if mapped is None:
        mapped = dual.map_values(v.values)
    return integrate_values(v.grid, mapped * mapped)


def dual_energy_grad(
    v: Field, dual: DualMap, params: ModelParams, mapped: np.ndarray | None = None
) -> Field:
    """Unconstrained gradient of the dual energy in the weighted inner product.

    Equals -laplacian(v) - |g(v)|^(p-2) g(v) g'(v); preserves the antisymmetric
    sector because the pointwise map is odd and the Laplacian is linear.
    """
    if mapped is None:
        mapped = dual.map_values(v.values)
    d = deriv_from_mapped(mapped)
    source = np.sign(mapped) * np.abs(mapped) ** (params.p - 1.0) * d
    lap = laplacian(v)
    return Field(v.grid, -lap.values - source, v.sector)


def constraint_direction(v: Field, dual: DualMap, mapped: np.ndarray | None = None) -> Field:
    """Pointwise g(v) g'(v): the gradient of the mass constraint (up to factor 2)."""
    if mapped is None:
        mapped = dual.map_values(v.values)
    return Field(v.grid, mapped * deriv_from_mapped(mapped), v.sector)


def lagrange_multiplier(v: Field, dual: DualMap, params: ModelParams) -> float:
    """Least-squares multiplier: projection of the gradient onto g(v) g'(v)."""
    mapped = dual.map_values(v.values)
    gdir = constraint_direction(v, dual, mapped)
    gg = inner(gdir, gdir)
    if gg == 0.0:
        raise DegenerateInputError("multiplier undefined: g(v) g'(v) vanishes identically")
    grad = dual_energy_grad(v, dual, params, mapped)
    return inner(grad, gdir) / gg


def residual(v: Field, mu: float, dual: DualMap, params: ModelParams) -> tuple[Field, float]:
    """Euler-Lagrange residual field of the transformed equation and its weighted norm."""
    mapped = dual.map_values(v.values)
    grad = dual_energy_grad(v, dual, params, mapped)
    gdir = constraint_direction(v, dual, mapped)
    res = Field(v.grid, grad.values - mu * gdir.values, v.sector)
    return res, wnorm_of(res)


def wnorm_of(f: Field) -> float:
    return float(np.sqrt(inner(f, f)))


def compute_diagnostics(
    v: Field,
    dual: DualMap,
    params: ModelParams,
    iteration: int = 0,
    step_size: float = 0.0,
    mapped: np.ndarray | None = None,
) -> Diagnostics:
    """All scalar diagnostics of an iterate in one pass (shares the mapped field)."""
    if mapped is None:
        mapped = dual.map_values(v.values)
    u = Field(v.grid, mapped, v.sector)
    grad = dual_energy_grad(v, dual, params, mapped)
    gdir = constraint_direction(v, dual, mapped)
    gg = inner(gdir, gdir)
    if gg == 0.0:
        raise DegenerateInputError("diagnostics undefined for identically zero field")
    mu = inner(grad, gdir) / gg
    proj = Field(v.grid, grad.values - mu * gdir.values, v.sector)
    pg_norm = wnorm_of(proj)
    return Diagnostics(
        energy_I=dual_energy(v, dual, params, mapped),
        energy_J=quasilinear_energy(u, params),
        mass=mass(v, dual, mapped),
        l2_of_v=inner(v, v),
        mu=mu,
        residual_norm=pg_norm,
        projected_grad_norm=pg_norm,
        iteration=iteration,
        step_size=step_size,
    )


def sign_change(v: Field) -> tuple[float, float]:
    """(min, max) of the field values; a sign-changing witness when min < 0 < max."""
    return float(np.min(v.values)), float(np.max(v.values))


def boundary_report(v: Field) -> float:
    return boundary_max(v)
