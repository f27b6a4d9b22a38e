"""Constrained critical points of the dual energy by projected gradient descent.

Each iteration takes a tangential descent step (the gradient with its
component along the constraint direction removed), optionally smoothed by a
spectral inverse-Helmholtz preconditioner, then re-projects exactly onto the
mass constraint by pure scaling: c -> mass(c v) is strictly increasing, so a
bracketed Newton recovers the unique feasible scale.  Step sizes come from
Armijo backtracking on the energy; the antisymmetric sector is re-imposed on
every iterate so sector membership holds to exact node-pair equality
regardless of floating-point summation order inside the kernels.

multisolve drives repeated seeded starts with a deflation penalty against the
already-found solutions (sign-pair aware).  This is an explicitly heuristic
multi-start device for finding distinct critical points; it does not compute
genus-based minimax levels and its outputs are never labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .dualmap import DualMap, deriv_from_mapped
from .errors import DegenerateInputError, NumericError, ParameterError, StagnationError
from .functionals import (
    Diagnostics,
    dual_energy,
    dual_energy_grad,
    quasilinear_energy,
)
from .grid import (
    SECTOR_ANTISYMMETRIC,
    Field,
    ModelParams,
    ReducedGrid,
    antisymmetrize,
    boundary_max,
    inner,
    integrate_values,
    wnorm,
)

_STEP_GROWTH = 1.5
_STEP_FLOOR = 1e-16


@dataclass(frozen=True)
class FlowConfig:
    """Knobs for the projected gradient flow; defaults are the supported setup."""

    step_init: float = 0.1
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    tol_grad: float = 1e-6
    tol_mass: float = 1e-10
    max_iters: int = 50000
    seed: int = 0
    deflation_strength: float = 1.0
    precondition: bool = True
    precond_shift: float = 0.0  # 0 = adaptive, max(1e-3, |mu|); > 0 = fixed
    step_max: float = 2.0

    def __post_init__(self):
        if not (self.step_init > 0):
            raise ParameterError("step_init must be positive")
        if not (0 < self.backtrack_factor < 1):
            raise ParameterError("backtrack_factor must lie in (0, 1)")
        if not (0 < self.armijo_c < 1):
            raise ParameterError("armijo_c must lie in (0, 1)")
        if not (self.tol_grad > 0 and self.tol_mass > 0):
            raise ParameterError("tolerances must be positive")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be nonnegative")
        if self.deflation_strength < 0:
            raise ParameterError("deflation_strength must be nonnegative")
        if self.precond_shift < 0:
            raise ParameterError("precond_shift must be nonnegative (0 = adaptive)")


@dataclass
class SolveReport:
    """Outcome of one constrained solve."""

    converged: bool
    iterations: int
    diagnostics: Diagnostics
    trace: list[Diagnostics]
    field: Field
    sector: str
    boundary_max: float


@dataclass
class MultisolveResult:
    """Distinct solution pairs found by deflated multi-start, energy-ascending."""

    reports: list[SolveReport]
    shortfall: bool
    starts_used: int


# ---------------------------------------------------------------------------
# mass projection
# ---------------------------------------------------------------------------


def project_mass(
    v: Field, lam: float, dual: DualMap, tol_mass: float = 1e-10, max_iters: int = 200
) -> tuple[Field, float]:
    """Scale v to the mass constraint: the unique c > 0 with mass(c v) = lam.

    The map c -> mass(c v) is strictly increasing (the dual map is odd and
    strictly increasing), vanishes at c = 0 and grows without bound, so a
    bracketed Newton with bisection fallback always lands.
    """
    if lam <= 0:
        raise ParameterError("lambda must be positive")
    vals = v.values
    m1 = integrate_values(v.grid, _mapped_sq(dual, vals))
    if m1 == 0.0:
        raise DegenerateInputError("cannot project the zero field onto a positive mass")
    c = math.sqrt(lam / m1)
    lo, hi = 0.0, math.inf
    # expand a finite upper bracket
    hi_c = c
    for _ in range(64):
        if integrate_values(v.grid, _mapped_sq(dual, hi_c * vals)) >= lam:
            hi = hi_c
            break
        hi_c *= 2.0
    else:
        raise NumericError("mass bracket expansion exceeded 2^64 scale")
    for _ in range(max_iters):
        mapped = dual.map_values(c * vals)
        mc = integrate_values(v.grid, mapped * mapped)
        err = mc - lam
        if abs(err) <= tol_mass:
            return Field(v.grid, c * vals, v.sector), c
        if err > 0:
            hi = min(hi, c)
        else:
            lo = max(lo, c)
        slope = integrate_values(v.grid, 2.0 * mapped * deriv_from_mapped(mapped) * vals)
        cand = c - err / slope if slope > 0 else math.nan
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * c
        c = cand
    raise NumericError(f"mass projection did not reach |mass - lambda| <= {tol_mass}")


def _mapped_sq(dual: DualMap, vals: np.ndarray) -> np.ndarray:
    m = dual.map_values(vals)
    return m * m


# ---------------------------------------------------------------------------
# spectral preconditioner: (shift - laplacian)^{-1} via per-axis eigenbases
# ---------------------------------------------------------------------------


class SpectralPreconditioner:
    """Exact inverse of (shift - laplacian) using the separable structure.

    Each 1D radial operator is symmetrized by the weight r^(d-1) and
    diagonalized once; applying the inverse is one small dense transform per
    axis.  Smooths the gradient so the descent rate is mesh-independent.
    """

    def __init__(self, grid: ReducedGrid):
        self.grid = grid
        self._q = []
        self._eig = []
        self._sqrt_w = []
        n = grid.n
        h2 = grid.h * grid.h
        for ax in range(grid.active_axes):
            rad = grid.node_factors[ax]
            face = grid.face_factors[ax]
            A = np.zeros((n, n))
            for j in range(n):
                fm = face[j - 1] if j > 0 else 0.0
                fp = face[j]
                A[j, j] = (fm + fp) / (rad[j] * h2)
                if j > 0:
                    A[j, j - 1] = -fm / (rad[j] * h2)
                if j < n - 1:
                    A[j, j + 1] = -fp / (rad[j] * h2)
            d = np.sqrt(rad)
            S = (d[:, None] * A) / d[None, :]
            S = 0.5 * (S + S.T)
            eigval, Q = np.linalg.eigh(S)
            self._q.append(Q)
            self._eig.append(eigval)
            self._sqrt_w.append(d)
        eigsum = np.zeros(grid.shape)
        for ax in range(grid.active_axes):
            sh = [1] * grid.active_axes
            sh[ax] = n
            eigsum = eigsum + self._eig[ax].reshape(sh)
        self._eigsum = eigsum

    def apply(self, values: np.ndarray, shift: float) -> np.ndarray:
        g = self.grid
        out = values
        for ax in range(g.active_axes):
            sh = [1] * g.active_axes
            sh[ax] = g.n
            out = out * self._sqrt_w[ax].reshape(sh)
            out = np.moveaxis(np.tensordot(self._q[ax].T, out, axes=([1], [ax])), 0, ax)
        out = out / (shift + self._eigsum)
        for ax in range(g.active_axes):
            sh = [1] * g.active_axes
            sh[ax] = g.n
            out = np.moveaxis(np.tensordot(self._q[ax], out, axes=([1], [ax])), 0, ax)
            out = out / self._sqrt_w[ax].reshape(sh)
        return out


# ---------------------------------------------------------------------------
# deflation penalty
# ---------------------------------------------------------------------------


class _Deflation:
    """Penalty strength * sum_i 1 / (||v - v_i||_w^2 ||v + v_i||_w^2), sign-pair aware."""

    def __init__(self, found: list[Field], strength: float):
        self.found = found
        self.strength = strength

    def value(self, v: Field) -> float:
        s = 0.0
        for vi in self.found:
            dm = inner(v - vi, v - vi)
            dp = inner(v + vi, v + vi)
            s += self.strength / (dm * dp)
        return s

    def grad_values(self, v: Field) -> np.ndarray:
        g = np.zeros_like(v.values)
        for vi in self.found:
            dm_f = v - vi
            dp_f = v + vi
            dm = inner(dm_f, dm_f)
            dp = inner(dp_f, dp_f)
            coef = -self.strength / (dm * dp)
            g += coef * (2.0 * dm_f.values / dm + 2.0 * dp_f.values / dp)
        return g


# ---------------------------------------------------------------------------
# the flow
# ---------------------------------------------------------------------------


def _enforce_sector(values: np.ndarray, sector: str) -> np.ndarray:
    if sector == SECTOR_ANTISYMMETRIC:
        return 0.5 * (values - np.swapaxes(values, 0, 1))
    return values


def solve(
    v0: Field,
    params: ModelParams,
    config: FlowConfig,
    dual: DualMap,
    sector: str | None = None,
    _deflation: _Deflation | None = None,
) -> SolveReport:
    """Minimize the dual energy on the mass constraint from v0.

    Iterates v_{k+1} = project(v_k - h * d_k) where d_k is the tangential
    (projected) gradient, preconditioned when config.precondition is set, and
    h satisfies the Armijo decrease condition.  Terminates when the projected
    gradient norm and the mass error are both within tolerance.
    """
    req_sector = sector or v0.sector
    v = v0
    if req_sector == SECTOR_ANTISYMMETRIC and v.sector != SECTOR_ANTISYMMETRIC:
        v = antisymmetrize(v)
    if float(np.max(np.abs(v.values))) == 0.0:
        raise DegenerateInputError("start field vanishes identically (antisymmetrization annihilated it?)")
    v, _ = project_mass(v, params.lam, dual, config.tol_mass / 10.0)

    precond = SpectralPreconditioner(v.grid) if config.precondition else None
    weights = v.grid.weights
    step = config.step_init
    trace: list[Diagnostics] = []
    last_step = 0.0
    converged = False
    it = 0
    mapped = dual.map_values(v.values)
    energy_plain = dual_energy(v, dual, params, mapped)
    while True:
        gdir_vals = mapped * deriv_from_mapped(mapped)
        grad_vals = _grad_with_penalty(v, dual, params, mapped, _deflation)
        gg = float(np.sum(weights * gdir_vals * gdir_vals))
        mu_hat = float(np.sum(weights * grad_vals * gdir_vals)) / gg
        proj_vals = grad_vals - mu_hat * gdir_vals
        pg_norm = math.sqrt(float(np.sum(weights * proj_vals * proj_vals)))
        mass_v = float(np.sum(weights * mapped * mapped))
        diag = Diagnostics(
            energy_I=energy_plain,
            energy_J=quasilinear_energy(Field(v.grid, mapped, v.sector), params),
            mass=mass_v,
            l2_of_v=float(np.sum(weights * v.values * v.values)),
            mu=mu_hat,
            residual_norm=pg_norm,
            projected_grad_norm=pg_norm,
            iteration=it,
            step_size=last_step,
        )
        trace.append(diag)
        if pg_norm <= config.tol_grad and abs(mass_v - params.lam) <= config.tol_mass:
            converged = True
            break
        if it >= config.max_iters:
            break

        energy_v = energy_plain if _deflation is None else energy_plain + _deflation.value(v)
        if precond is not None:
            shift = config.precond_shift if config.precond_shift > 0 else max(1e-3, abs(mu_hat))
            d_vals = precond.apply(proj_vals, shift)
            d_vals -= (float(np.sum(weights * d_vals * gdir_vals)) / gg) * gdir_vals
        else:
            d_vals = proj_vals
        d_vals = _enforce_sector(d_vals, req_sector)
        slope = float(np.sum(weights * grad_vals * d_vals))
        if not np.isfinite(slope) or slope <= 0:
            # preconditioned direction lost descent (can happen deep in a penalty
            # well); fall back to the plain projected gradient
            d_vals = _enforce_sector(proj_vals, req_sector)
            slope = float(np.sum(weights * grad_vals * d_vals))

        h = min(step * _STEP_GROWTH, config.step_max)
        while True:
            trial_vals = _enforce_sector(v.values - h * d_vals, req_sector)
            try:
                trial, _ = project_mass(
                    Field(v.grid, trial_vals, req_sector), params.lam, dual, config.tol_mass / 10.0
                )
                trial_mapped = dual.map_values(trial.values)
                trial_plain = dual_energy(trial, dual, params, trial_mapped)
                energy_t = trial_plain if _deflation is None else trial_plain + _deflation.value(trial)
                ok = energy_t <= energy_v - config.armijo_c * h * slope
            except DegenerateInputError:
                ok = False
            if ok:
                break
            h *= config.backtrack_factor
            if h < _STEP_FLOOR:
                report = _make_report(False, it, diag, trace, v, req_sector)
                raise StagnationError(
                    f"line search stagnated at iteration {it} (step below {_STEP_FLOOR})", report
                )
        v = trial
        mapped = trial_mapped
        energy_plain = trial_plain
        step = h
        last_step = h
        it += 1

    return _make_report(converged, it, trace[-1], trace, v, req_sector)


def _grad_with_penalty(v, dual, params, mapped, deflation):
    grad = dual_energy_grad(v, dual, params, mapped).values
    if deflation is not None:
        grad = grad + deflation.grad_values(v)
    return grad


def _make_report(converged, iterations, diag, trace, v, sector) -> SolveReport:
    return SolveReport(
        converged=converged,
        iterations=iterations,
        diagnostics=diag,
        trace=trace,
        field=v,
        sector=sector,
        boundary_max=boundary_max(v),
    )


# ---------------------------------------------------------------------------
# seeded starts
# ---------------------------------------------------------------------------


def random_bump_start(grid: ReducedGrid, seed: int, n_bumps: int = 5) -> Field:
    """Sum of seeded Gaussian bumps with random centers and amplitudes in [-1, 1]."""
    rng = np.random.default_rng(seed)
    vals = grid.zero_values()
    for _ in range(n_bumps):
        centers = rng.uniform(0.5, 0.55 * grid.L, size=grid.active_axes)
        width = rng.uniform(max(2.0 * grid.h, 0.04 * grid.L), 0.12 * grid.L)
        amp = rng.uniform(-1.0, 1.0)
        sq = np.zeros(grid.shape)
        for ax in range(grid.active_axes):
            sq = sq + (grid.coord(ax) - centers[ax]) ** 2
        vals += amp * np.exp(-sq / (2.0 * width * width))
    return Field(grid, vals)


def antisymmetric_start(grid: ReducedGrid, seed: int, max_attempts: int = 100) -> Field:
    """Antisymmetrized random bumps; retries with successive seeds if annihilated."""
    for k in range(max_attempts):
        cand = antisymmetrize(random_bump_start(grid, seed + k))
        if float(np.max(np.abs(cand.values))) > 0.0:
            return cand
    raise DegenerateInputError(f"no nonzero antisymmetric start after {max_attempts} attempts")


def separated_pair_start(grid: ReducedGrid, width: float) -> Field:
    """The (r1 - r2) * Gaussian profile: the simplest smooth antisymmetric trial."""
    r1 = grid.coord(0)
    r2 = grid.coord(1)
    with np.errstate(divide="ignore"):
        # extreme widths may underflow the exponent; the zero trial that
        # results is rejected downstream as degenerate
        vals = (r1 - r2) * np.exp(-grid.radius_sq() / (2.0 * width * width))
    return Field(grid, np.broadcast_to(vals, grid.shape).copy(), SECTOR_ANTISYMMETRIC)


# ---------------------------------------------------------------------------
# deflated multi-start
# ---------------------------------------------------------------------------


def multisolve(
    k: int,
    params: ModelParams,
    config: FlowConfig,
    dual: DualMap,
    grid: ReducedGrid,
    max_starts: int | None = None,
) -> MultisolveResult:
    """Search for k distinct solution pairs by deflated multi-start.

    Seeded antisymmetric random starts; once solutions are banked, later
    starts descend the energy plus a deflation penalty around each found pair,
    and every accepted solution is re-polished on the clean problem.  Distinct
    means min(||v_i - v_j||_w, ||v_i + v_j||_w) > 1e-3 sqrt(lambda).  Returns
    however many pairs were found with a shortfall flag (never raises for a
    shortfall); reports come back sorted by energy, ascending.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    if max_starts is None:
        max_starts = 4 * k + 2
    found: list[SolveReport] = []
    tol_dist = 1e-3 * math.sqrt(params.lam)
    starts = 0
    # the deflated phase only needs to land in a fresh basin; the polish pass
    # on the clean problem supplies the accuracy
    rough_config = replace(config, tol_grad=50.0 * config.tol_grad)
    for idx in range(max_starts):
        if len(found) >= k:
            break
        starts += 1
        v0 = antisymmetric_start(grid, config.seed + idx)
        deflation = (
            _Deflation([r.field for r in found], config.deflation_strength) if found else None
        )
        try:
            rough = solve(v0, params, rough_config, dual, sector=SECTOR_ANTISYMMETRIC, _deflation=deflation)
        except StagnationError:
            continue
        try:
            polished = solve(rough.field, params, config, dual, sector=SECTOR_ANTISYMMETRIC)
        except StagnationError:
            continue
        if not polished.converged:
            continue
        distinct = all(
            min(wnorm(polished.field - r.field), wnorm(polished.field + r.field)) > tol_dist
            for r in found
        )
        if distinct:
            found.append(polished)
    found.sort(key=lambda r: r.diagnostics.energy_I)
    return MultisolveResult(reports=found, shortfall=len(found) < k, starts_used=starts)
