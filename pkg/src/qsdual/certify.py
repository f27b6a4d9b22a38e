"""Numerical certification of the quantitative estimates behind the solver.

Every check here inverts the usual testing relationship: the inequalities are
theorems about the dual map and the energies, so a violated margin indicts the
implementation, never the estimate.  Margins are oriented so that nonnegative
means the inequality holds; reports carry the worst margin over all samples
together with the measured constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dualmap import FOURTH_ROOT_2, DualMap, deriv_from_mapped
from .errors import DegenerateInputError, ParameterError
from .functionals import (
    dual_energy,
    dual_energy_constrained,
    quasilinear_energy,
    quasilinear_energy_constrained,
)
from .grid import Field, ModelParams, ReducedGrid, build_grid
from .kernels import antideriv
from .flow import project_mass, separated_pair_start

_EPS = float(np.finfo(np.float64).eps)


@dataclass
class CheckResult:
    name: str
    samples_tested: int
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.worst_margin >= 0.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "samples_tested": self.samples_tested,
            "worst_margin": self.worst_margin,
            "pass": bool(self.passed),
        }


@dataclass
class CertReport:
    checks: list[CheckResult] = field(default_factory=list)
    constants: dict[str, float] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "checks": [c.as_dict() for c in self.checks],
            "constants": dict(self.constants),
            "all_pass": bool(self.all_passed),
        }

    def render_table(self) -> str:
        width = max((len(c.name) for c in self.checks), default=4)
        lines = [f"{'check'.ljust(width)}  samples  worst_margin  pass"]
        for c in self.checks:
            lines.append(
                f"{c.name.ljust(width)}  {c.samples_tested:7d}  {c.worst_margin: .5e}  {'yes' if c.passed else 'NO'}"
            )
        for name, val in self.constants.items():
            lines.append(f"constant {name} = {val!r}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# dual-map certification
# ---------------------------------------------------------------------------


def certify_dual(dual: DualMap, sample_count: int = 10_000) -> CertReport:
    """Sweep the six dual-map properties on log-spaced samples of both signs.

    Samples cover |t| in [1e-8, 1e8] plus 0.  The six reported checks are the
    map's defining properties: well-definedness (derivative identity,
    monotonicity, oddness, round trip through the antiderivative), the two
    asymptotic limits, the derivative and linear bounds, the product bounds,
    the square-root bound, and positivity of the comparison constants.
    """
    if sample_count < 1000:
        raise ParameterError("sample_count must be at least 1000")
    half = sample_count // 2
    pos = np.logspace(-8.0, 8.0, half)
    t = np.concatenate([-pos[::-1], [0.0], pos])
    f = dual.map_values(t)
    fp = deriv_from_mapped(f)
    ns = t.size

    ode_margin = 1e-10 - float(np.max(np.abs(fp * np.sqrt(1.0 + 2.0 * f * f) - 1.0)))
    odd_margin = -float(np.max(np.abs(dual.map_values(-t) + f)))
    mono_margin = float(np.min(np.diff(f)))
    rt_tol = 10.0 * np.maximum(dual.newton_tol, 8.0 * _EPS * np.abs(t))
    rt_margin = float(np.min(rt_tol - np.abs(antideriv(f) - t)))
    defined_margin = min(ode_margin, odd_margin, mono_margin, rt_margin)

    small = np.abs(t) <= 1e-4
    small = small & (t != 0.0)
    small_margin = 1e-6 - float(np.max(np.abs(f[small] / t[small] - 1.0)))
    big_ratio = dual.value(1e6) / 1e3
    big_margin = 1e-3 - abs(big_ratio - FOURTH_ROOT_2)
    limits_margin = min(small_margin, big_margin)

    deriv_margin = 1.0 - float(np.max(np.abs(fp)))
    lin_margin = float(np.min(np.abs(t) - np.abs(f)))
    bounds_margin = min(deriv_margin, lin_margin)

    prod = np.abs(t) * fp
    prod_lower = float(np.min(prod - np.abs(f) / 2.0))
    prod_upper = float(np.min(np.abs(f) - prod))
    prod_margin = min(prod_lower, prod_upper)

    sqrt_margin = float(np.min(FOURTH_ROOT_2 * np.sqrt(np.abs(t)) - np.abs(f)))

    inside = (np.abs(t) <= 1.0) & (t != 0.0)
    outside = np.abs(t) >= 1.0
    c1 = float(np.min(np.abs(f[inside]) / np.abs(t[inside])))
    c2 = float(np.min(np.abs(f[outside]) / np.sqrt(np.abs(t[outside]))))
    sup_sqrt_ratio = float(np.max(np.abs(f[outside]) / np.sqrt(np.abs(t[outside]))))

    checks = [
        CheckResult("defined_invertible_smooth", ns, defined_margin),
        CheckResult("asymptotic_limits", ns, limits_margin),
        CheckResult("derivative_and_linear_bounds", ns, bounds_margin),
        CheckResult("product_bounds", ns, prod_margin),
        CheckResult("sqrt_growth_bound", ns, sqrt_margin),
        CheckResult("comparison_constants_positive", ns, min(c1, c2)),
    ]
    constants = {
        "C1": c1,
        "C2": c2,
        "sup_sqrt_ratio": sup_sqrt_ratio,
        "large_t_ratio": big_ratio,
        "ode_identity_worst": 1e-10 - ode_margin,
    }
    return CertReport(checks=checks, constants=constants)


# ---------------------------------------------------------------------------
# energy equivalence under the change of variables
# ---------------------------------------------------------------------------


def _smooth_recipe(rng: np.random.Generator, L: float, axes: int, n_bumps: int = 4):
    bumps = []
    for _ in range(n_bumps):
        center = rng.uniform(0.1 * L, 0.5 * L, size=axes)
        width = rng.uniform(0.06 * L, 0.12 * L)
        amp = rng.uniform(-0.5, 0.5)
        bumps.append((center, width, amp))
    return bumps


def _evaluate_recipe(grid: ReducedGrid, bumps) -> Field:
    vals = grid.zero_values()
    for center, width, amp in bumps:
        sq = np.zeros(grid.shape)
        for ax in range(grid.active_axes):
            sq = sq + (grid.coord(ax) - center[ax]) ** 2
        vals += amp * np.exp(-sq / (2.0 * width * width))
    return Field(grid, vals)


def check_equivalence(
    params: ModelParams,
    grid_sizes: list[int],
    trials: int,
    seed: int,
    dual: DualMap | None = None,
    L: float = 8.0,
) -> CertReport:
    """Refinement study of quasilinear_energy(map(v)) == dual_energy(v).

    The identity is exact in the continuum; discretely the two face sums
    differ at second order, so the gap must shrink with observed order >= 1.8
    and sit below 1e-4 * (1 + |E|) on the finest grid.  The multiplier-incl.
    forms differ from the plain ones by the same quadrature of the same
    pointwise values, so their gap must agree to machine precision.
    """
    if sorted(grid_sizes) != list(grid_sizes) or len(grid_sizes) < 2:
        raise ParameterError("grid_sizes must be increasing with at least two entries")
    if trials < 5:
        raise ParameterError("trials must be at least 5")
    dual = dual or DualMap()
    rng = np.random.default_rng(seed)
    grids = {n: build_grid(params, L, n) for n in grid_sizes}
    worst_order = math.inf
    worst_fine = -math.inf
    worst_mu_gap = 0.0
    orders = []
    for _ in range(trials):
        bumps = _smooth_recipe(rng, L, grids[grid_sizes[0]].active_axes)
        mu = rng.uniform(-2.0, 2.0)
        errs = []
        for n in grid_sizes:
            v = _evaluate_recipe(grids[n], bumps)
            mapped = dual.map_values(v.values)
            u = Field(v.grid, mapped, v.sector)
            e_dual = dual_energy(v, dual, params, mapped)
            e_quasi = quasilinear_energy(u, params)
            errs.append(abs(e_quasi - e_dual))
            if n == grid_sizes[-1]:
                rel_fine = errs[-1] / (1.0 + abs(e_dual))
                worst_fine = max(worst_fine, rel_fine)
                gap_dual = dual_energy_constrained(v, mu, dual, params) - e_dual
                gap_quasi = quasilinear_energy_constrained(u, mu, params) - e_quasi
                scale = 1.0 + abs(gap_dual)
                worst_mu_gap = max(worst_mu_gap, abs(gap_dual - gap_quasi) / scale)
        logs = np.log(errs)
        logn = np.log(np.asarray(grid_sizes, dtype=float))
        slope = -np.polyfit(logn, logs, 1)[0]
        orders.append(float(slope))
        worst_order = min(worst_order, float(slope))
    checks = [
        CheckResult("equivalence_order", trials, worst_order - 1.8),
        CheckResult("equivalence_fine_error", trials, 1e-4 - worst_fine),
        CheckResult("multiplier_terms_match", trials, 1e-13 - worst_mu_gap),
    ]
    constants = {"min_order": worst_order, "max_rel_error_fine": worst_fine, "orders_mean": float(np.mean(orders))}
    return CertReport(checks=checks, constants=constants)


# ---------------------------------------------------------------------------
# coercivity exponent bookkeeping
# ---------------------------------------------------------------------------


def coercivity_report(params: ModelParams) -> CertReport:
    """Exponents of the interpolation estimate that bounds the energy below.

    theta is the interpolation exponent, e_E the power of the Dirichlet term,
    e_M the power of the prescribed mass; boundedness below needs e_E < 1,
    which holds across the whole admissible exponent range.
    """
    N, p = params.N, params.p
    theta = (p - 2.0) * (N - 2.0) / (2.0 * (N + 2.0))
    e_energy = (p - 2.0) * N / (2.0 * (N + 2.0))
    e_mass = (4.0 * N - (N - 2.0) * p) / (2.0 * (N + 2.0))
    checks = [CheckResult("energy_exponent_below_one", 1, 1.0 - e_energy)]
    constants = {
        "theta": theta,
        "energy_exponent": e_energy,
        "mass_exponent": e_mass,
        "p_mass_critical": params.p_mass_critical,
        "p_max": params.p_max,
    }
    report = CertReport(checks=checks, constants=constants)
    report.constants["regime"] = params.regime()  # type: ignore[assignment]
    return report


# ---------------------------------------------------------------------------
# negativity probe and threshold scan
# ---------------------------------------------------------------------------


def default_widths(grid: ReducedGrid, count: int = 8) -> list[float]:
    """Geometric widths up to L/6, where the trial decays below 1e-8 at the wall."""
    top = grid.L / 6.0
    return list(np.geomspace(max(4.0 * grid.h, top / 8.0), top, count))


def negativity_probe(
    params: ModelParams,
    dual: DualMap,
    widths: list[float],
    grid: ReducedGrid,
    return_curve: bool = False,
):
    """Best trial energy over the separated-pair Gaussian family at fixed mass.

    The result is an upper bound for the constrained energy infimum restricted
    to this family; it certifies negativity when it is negative but never
    claims to be the infimum itself.
    """
    if not widths or any(b <= 0 for b in widths):
        raise ParameterError("widths must be positive")
    best_energy = math.inf
    best_width = None
    curve = []
    for b in widths:
        trial = separated_pair_start(grid, b)
        try:
            projected, _ = project_mass(trial, params.lam, dual)
        except DegenerateInputError:
            continue
        energy = dual_energy(projected, dual, params)
        curve.append((float(b), energy))
        if energy < best_energy:
            best_energy = energy
            best_width = float(b)
    if best_width is None:
        raise DegenerateInputError("every probe width degenerated to the zero trial")
    if return_curve:
        return best_energy, best_width, curve
    return best_energy, best_width


@dataclass
class ScanResult:
    lambda_star: float | None
    curve: list[tuple[float, float]]
    upward_closed: bool


def lambda_threshold_scan(
    params: ModelParams,
    dual: DualMap,
    lambda_grid: list[float],
    grid: ReducedGrid,
    widths: list[float] | None = None,
) -> ScanResult:
    """Smallest grid mass with a negative probe energy, plus the whole curve.

    Only meaningful in the intermediate exponent regime (below it the probe
    should be negative for every mass; use negativity_probe directly there).
    The negativity set along the curve should be upward closed; a violation is
    reported through the flag, not as a failure, because the probe is only an
    upper bound.
    """
    if params.p < params.p_mass_critical:
        raise ParameterError(
            f"threshold scan needs p in [2+4/N, 4+4/N) = [{params.p_mass_critical:g}, {params.p_max:g}); "
            f"got p={params.p} (use negativity_probe for the subcritical regime)"
        )
    lam_list = [float(x) for x in lambda_grid]
    if lam_list != sorted(lam_list) or any(x <= 0 for x in lam_list):
        raise ParameterError("lambda_grid must be increasing and positive")
    widths = widths if widths is not None else default_widths(grid)
    curve = []
    for lam in lam_list:
        best_energy, _ = negativity_probe(params.with_lam(lam), dual, widths, grid)
        curve.append((lam, best_energy))
    lambda_star = next((lam for lam, e in curve if e < 0.0), None)
    return ScanResult(
        lambda_star=lambda_star, curve=curve, upward_closed=negativity_upward_closed(curve)
    )


def negativity_upward_closed(curve: list[tuple[float, float]]) -> bool:
    """True when the curve, once negative, stays negative for larger masses."""
    seen_negative = False
    for _, e in curve:
        if seen_negative and e >= 0.0:
            return False
        seen_negative = seen_negative or e < 0.0
    return True
