"""Certification suite: inequality sweeps, equivalence, exponents, probes."""

import math
import time

import numpy as np
import pytest

from qsdual import (
    DegenerateInputError,
    DualMap,
    ModelParams,
    ParameterError,
    build_grid,
    certify_dual,
    check_equivalence,
    coercivity_report,
    lambda_threshold_scan,
    negativity_probe,
)
from qsdual.certify import default_widths, negativity_upward_closed
from qsdual.dualmap import FOURTH_ROOT_2


# -- dual-map certification -----------------------------------------------------


def test_certify_dual_all_pass(dual):
    t0 = time.perf_counter()
    report = certify_dual(dual, sample_count=10_000)
    elapsed = time.perf_counter() - t0
    assert report.all_passed
    assert len(report.checks) == 6
    for check in report.checks:
        assert check.samples_tested >= 10_000
        assert check.worst_margin >= 0.0
    assert elapsed < 1.0


def test_certify_dual_constants(dual):
    report = certify_dual(dual, sample_count=20_000)
    c1 = report.constants["C1"]
    c2 = report.constants["C2"]
    assert c1 > 0.0 and c2 > 0.0
    # both infima are attained at |t| = 1 where the two bounds meet; the
    # sampled values sit above the true infimum by at most the mesh spacing
    f1 = dual.value(1.0)
    assert f1 - 1e-12 <= c1 <= f1 + 2e-3
    assert f1 - 1e-12 <= c2 <= f1 + 2e-3
    # the square-root growth ratio approaches its ceiling from below
    assert report.constants["sup_sqrt_ratio"] < FOURTH_ROOT_2
    assert abs(report.constants["sup_sqrt_ratio"] - FOURTH_ROOT_2) < 1e-3
    assert abs(report.constants["large_t_ratio"] - FOURTH_ROOT_2) < 1e-3


def test_certify_dual_rejects_small_sample(dual):
    with pytest.raises(ParameterError):
        certify_dual(dual, sample_count=10)


def test_certify_report_rendering(dual):
    report = certify_dual(dual, sample_count=1000)
    table = report.render_table()
    assert "sqrt_growth_bound" in table
    payload = report.as_dict()
    assert payload["all_pass"] is True
    assert len(payload["checks"]) == 6


# -- energy equivalence ----------------------------------------------------------


def test_check_equivalence_orders_and_fine_error(dual):
    params = ModelParams(N=4, m=2, p=3.0, lam=1.0)
    report = check_equivalence(params, [64, 128, 256], trials=5, seed=0, dual=dual)
    assert report.all_passed
    assert report.constants["min_order"] >= 1.8
    assert report.constants["max_rel_error_fine"] <= 1e-4


def test_check_equivalence_two_grid_ratio(dual):
    # refinement 64 -> 128 on one fixed smooth field shrinks the gap about 4x
    params = ModelParams(N=4, m=2, p=3.0, lam=1.0)
    report = check_equivalence(params, [64, 128], trials=5, seed=1, dual=dual)
    order = report.constants["min_order"]
    assert abs(2.0 ** order - 4.0) <= 0.8 * 4.0 ** 0.5  # 4.0 +- 0.8 on the ratio scale
    assert 2.0 ** order > 3.2


def test_check_equivalence_input_validation(dual):
    params = ModelParams(N=4, m=2, p=3.0, lam=1.0)
    with pytest.raises(ParameterError):
        check_equivalence(params, [128, 64], trials=5, seed=0, dual=dual)
    with pytest.raises(ParameterError):
        check_equivalence(params, [64, 128], trials=2, seed=0, dual=dual)


# -- coercivity exponents ---------------------------------------------------------


def test_coercivity_exponents_forced_value():
    report = coercivity_report(ModelParams(N=4, m=2, p=3.0, lam=1.0))
    assert abs(report.constants["energy_exponent"] - 1.0 / 3.0) < 1e-15
    assert report.all_passed
    theta = report.constants["theta"]
    assert abs(theta - (3.0 - 2.0) * 2.0 / 12.0) < 1e-15


def test_coercivity_regime_classification():
    assert coercivity_report(ModelParams(N=4, m=2, p=2.5, lam=1.0)).constants["regime"] == "subcritical"
    # the boundary itself belongs to the intermediate regime
    assert coercivity_report(ModelParams(N=4, m=2, p=3.0, lam=1.0)).constants["regime"] == "intermediate"
    below = math.nextafter(3.0, 2.0)
    assert coercivity_report(ModelParams(N=4, m=2, p=below, lam=1.0)).constants["regime"] == "subcritical"


def test_coercivity_exponent_below_one_on_dense_grid():
    for N, m in ((4, 2), (6, 2), (8, 3)):
        pmax = 4.0 + 4.0 / N
        for p in np.linspace(2.0 + 1e-9, pmax - 1e-9, 300):
            report = coercivity_report(ModelParams(N=N, m=m, p=float(p), lam=1.0))
            assert report.constants["energy_exponent"] < 1.0


# -- negativity probe --------------------------------------------------------------


def test_probe_subcritical_negative(dual):
    params = ModelParams(N=4, m=2, p=2.5, lam=100.0)
    grid = build_grid(params, 96.0, 96)
    best, width = negativity_probe(params, dual, list(np.geomspace(4.0, 16.0, 8)), grid)
    assert best < 0.0
    assert 4.0 <= width <= 16.0


def test_probe_matches_direct_recomputation(dual):
    from qsdual import dual_energy, project_mass
    from qsdual.flow import separated_pair_start

    params = ModelParams(N=4, m=2, p=2.5, lam=1.0)
    grid = build_grid(params, 24.0, 48)
    best, width = negativity_probe(params, dual, [2.0], grid)
    projected, _ = project_mass(separated_pair_start(grid, 2.0), params.lam, dual)
    assert best == dual_energy(projected, dual, params)
    assert width == 2.0


def test_probe_rejects_degenerate_widths(dual):
    params = ModelParams(N=4, m=2, p=2.5, lam=1.0)
    grid = build_grid(params, 24.0, 48)
    with pytest.raises(DegenerateInputError):
        negativity_probe(params, dual, [1e-300], grid)  # trial underflows to zero
    with pytest.raises(ParameterError):
        negativity_probe(params, dual, [], grid)


def test_default_widths_respect_box(grid_2d):
    widths = default_widths(grid_2d)
    assert max(widths) <= grid_2d.L / 6.0 + 1e-12
    assert all(b > 0 for b in widths)


# -- threshold scan ------------------------------------------------------------------


def test_scan_finds_threshold_on_extended_grid(dual):
    params = ModelParams(N=4, m=2, p=3.5, lam=1.0)
    grid = build_grid(params, 120.0, 256)
    widths = list(np.geomspace(2.0, 20.0, 10))
    scan = lambda_threshold_scan(params, dual, [1e3, 1e4, 2.2e4, 3e4], grid, widths)
    assert scan.lambda_star == 2.2e4
    assert scan.upward_closed
    assert [lam for lam, _ in scan.curve] == [1e3, 1e4, 2.2e4, 3e4]
    assert all(e < 0 for lam, e in scan.curve if lam >= scan.lambda_star)


def test_scan_singleton_grid(dual):
    params = ModelParams(N=4, m=2, p=3.5, lam=1.0)
    grid = build_grid(params, 24.0, 48)
    scan = lambda_threshold_scan(params, dual, [1.0], grid)
    assert len(scan.curve) == 1
    assert scan.lambda_star in (1.0, None)


def test_scan_rejects_subcritical_exponent(dual):
    params = ModelParams(N=4, m=2, p=2.5, lam=1.0)
    grid = build_grid(params, 24.0, 48)
    with pytest.raises(ParameterError, match="subcritical"):
        lambda_threshold_scan(params, dual, [1.0, 2.0], grid)


def test_scan_rejects_unsorted_grid(dual):
    params = ModelParams(N=4, m=2, p=3.5, lam=1.0)
    grid = build_grid(params, 24.0, 48)
    with pytest.raises(ParameterError):
        lambda_threshold_scan(params, dual, [2.0, 1.0], grid)


def test_upward_closed_flag_logic():
    assert negativity_upward_closed([(1.0, 0.5), (2.0, -0.1), (3.0, -0.2)])
    assert not negativity_upward_closed([(1.0, -0.1), (2.0, 0.5)])
    assert negativity_upward_closed([])
