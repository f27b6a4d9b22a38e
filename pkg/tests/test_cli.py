"""CLI: config parsing, run directories, file formats, exit statuses."""

import json
from pathlib import Path

import numpy as np
import pytest

from qsdual import ConfigError, FlowConfig, ModelParams, ParameterError, load_field
from qsdual.cli import (
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_PARAMETER,
    EXIT_SHORTFALL,
    RunConfig,
    main,
    parse_config,
    run_command,
    serialize_config,
)
from qsdual.functionals import CSV_COLUMNS
from qsdual.grid import dump_field


FAST_SOLVE = """
[model]
N = 4
m = 2
p = 2.5
lambda = 1.0

[grid]
L = 12.0
n = 32

[flow]
max_iters = 20000

[run]
seed = 0
output_dir = {out}
"""


def _config(tmp_path, extra=""):
    return parse_config(FAST_SOLVE.format(out=tmp_path) + extra)


# -- parsing -------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config("")
    assert cfg.model == ModelParams(N=4, m=2, p=3.0, lam=10.0)
    assert (cfg.grid_L, cfg.grid_n) == (8.0, 128)
    assert cfg.flow == FlowConfig()
    assert cfg.sector == "antisymmetric"


def test_parse_rejects_excluded_gap_dimension():
    with pytest.raises(ParameterError, match="N-2m must not equal 1"):
        parse_config("[model]\nN = 5\nm = 2\n")


def test_parse_rejects_exponent_out_of_range():
    with pytest.raises(ParameterError, match=r"p must lie in \(2, 4\+4/N\) = \(2, 5\)"):
        parse_config("[model]\np = 5.5\n")


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match=r"unknown config key \[model\] bogus"):
        parse_config("[model]\nbogus = 3\n")


def test_parse_rejects_unknown_section():
    with pytest.raises(ConfigError, match=r"unknown config section \[misc\]"):
        parse_config("[misc]\nx = 1\n")


def test_parse_rejects_bad_value():
    with pytest.raises(ConfigError, match=r"\[grid\] n"):
        parse_config("[grid]\nn = many\n")


def test_set_overrides_apply_after_file():
    cfg = parse_config("[model]\np = 2.5\n", overrides=["model.p=3.5", "grid.n=64"])
    assert cfg.model.p == 3.5
    assert cfg.grid_n == 64
    with pytest.raises(ConfigError, match="--set"):
        parse_config("", overrides=["nodots"])


def test_seed_is_shared_with_flow():
    cfg = parse_config("[run]\nseed = 7\n")
    assert cfg.seed == 7
    assert cfg.flow.seed == 7


def test_output_root_env(monkeypatch):
    monkeypatch.setenv("QSDUAL_OUTPUT_ROOT", "/tmp/qsdual-root")
    assert parse_config("").output_dir == "/tmp/qsdual-root"
    assert parse_config("[run]\noutput_dir = elsewhere\n").output_dir == "elsewhere"


def test_config_roundtrip_randomized():
    rng = np.random.default_rng(0)
    for _ in range(25):
        N = int(rng.choice([4, 6, 8]))
        m = int(rng.integers(2, N // 2 + 1))
        if N - 2 * m == 1:
            m += 1 if m + 1 <= N // 2 else -1
        if N - 2 * m == 1:
            continue
        seed = int(rng.integers(0, 100))  # one seed knob: [run] seed feeds the flow
        cfg = RunConfig(
            model=ModelParams(N=N, m=m, p=float(rng.uniform(2.01, 4.0 + 4.0 / N - 0.01)), lam=float(rng.uniform(0.1, 100))),
            grid_L=float(rng.uniform(4.0, 64.0)),
            grid_n=int(rng.integers(16, 256)),
            flow=FlowConfig(
                step_init=float(rng.uniform(0.01, 1.0)),
                tol_grad=float(10.0 ** rng.uniform(-8, -4)),
                max_iters=int(rng.integers(10, 10000)),
                seed=seed,
            ),
            seed=seed,
            lambda_grid=tuple(float(x) for x in np.sort(rng.uniform(0.01, 100, size=3))),
            widths=None if rng.random() < 0.5 else tuple(float(x) for x in np.sort(rng.uniform(0.1, 4, size=2))),
        )
        again = parse_config(serialize_config(cfg))
        assert again == cfg


# -- commands --------------------------------------------------------------------


def _single_run_dir(root: Path) -> Path:
    dirs = [d for d in Path(root).iterdir() if d.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_solve_run_directory_contract(tmp_path):
    cfg = _config(tmp_path / "runs")
    status = run_command("solve", cfg)
    assert status == EXIT_OK
    run_dir = _single_run_dir(tmp_path / "runs")
    assert (run_dir / "config.echo").exists()
    assert parse_config((run_dir / "config.echo").read_text()) == cfg

    header = (run_dir / "diagnostics.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)

    summary = json.loads((run_dir / "summary.json").read_text())
    for key in ("command", "params", "converged", "energy_I", "energy_J", "mass", "mu", "residual_norm", "sign_change", "constants"):
        assert key in summary
    assert summary["command"] == "solve"
    assert summary["converged"] is True
    assert summary["sign_change"]["min"] < 0 < summary["sign_change"]["max"]

    field, params = load_field(run_dir / "solution-0.field")
    assert params == cfg.model
    redump = tmp_path / "redump.field"
    dump_field(field, params, redump)
    assert redump.read_bytes() == (run_dir / "solution-0.field").read_bytes()


def test_solve_determinism_bit_identical(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_command("solve", _config(out_a)) == EXIT_OK
    assert run_command("solve", _config(out_b)) == EXIT_OK
    dir_a, dir_b = _single_run_dir(out_a), _single_run_dir(out_b)
    assert (dir_a / "diagnostics.csv").read_bytes() == (dir_b / "diagnostics.csv").read_bytes()
    assert (dir_a / "solution-0.field").read_bytes() == (dir_b / "solution-0.field").read_bytes()


def test_solve_budget_exhaustion_is_numeric_failure(tmp_path):
    cfg = _config(tmp_path, extra="")
    cfg = parse_config(serialize_config(cfg), overrides=["flow.max_iters=2"])
    assert run_command("solve", cfg) == EXIT_NUMERIC


def test_multisolve_shortfall_exit(tmp_path):
    cfg = _config(tmp_path / "runs", extra="k = 40\nmax_starts = 2\n")
    status = run_command("multisolve", cfg)
    assert status == EXIT_SHORTFALL
    run_dir = _single_run_dir(tmp_path / "runs")
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["shortfall"] is True
    assert summary["requested_k"] == 40
    found = len(summary["solutions"])
    assert found >= 1
    for i in range(found):
        assert (run_dir / f"solution-{i}.field").exists()
        assert (run_dir / f"diagnostics-{i}.csv").exists()


def test_certify_dual_command(tmp_path):
    cfg = parse_config(f"[run]\noutput_dir = {tmp_path / 'runs'}\nsample_count = 2000\n")
    assert run_command("certify-dual", cfg) == EXIT_OK
    summary = json.loads((_single_run_dir(tmp_path / "runs") / "summary.json").read_text())
    assert summary["all_pass"] is True
    assert len(summary["checks"]) == 6
    assert all(c["pass"] for c in summary["checks"])


def test_check_equivalence_command(tmp_path):
    cfg = parse_config(
        f"[run]\noutput_dir = {tmp_path / 'runs'}\ngrid_sizes = 64,128,256\ntrials = 5\n"
    )
    assert run_command("check-equivalence", cfg) == EXIT_OK


def test_probe_command_emits_curve(tmp_path):
    text = f"""
[model]
p = 2.5
lambda = 100.0
[grid]
L = 96.0
n = 96
[run]
output_dir = {tmp_path / 'runs'}
widths = 4.0,8.0,16.0
"""
    assert run_command("probe", parse_config(text)) == EXIT_OK
    run_dir = _single_run_dir(tmp_path / "runs")
    lines = (run_dir / "curve.csv").read_text().splitlines()
    assert lines[0] == "width,energy_I"
    assert len(lines) == 4
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["constants"]["negative"] is True


def test_sweep_command_emits_curve(tmp_path):
    text = f"""
[model]
p = 3.5
[grid]
L = 24.0
n = 32
[run]
output_dir = {tmp_path / 'runs'}
lambda_grid = 1.0,10.0
"""
    assert run_command("sweep", parse_config(text)) == EXIT_OK
    run_dir = _single_run_dir(tmp_path / "runs")
    lines = (run_dir / "curve.csv").read_text().splitlines()
    assert lines[0] == "lambda,best_I"
    assert len(lines) == 3
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["lambda_star"] is None  # far below the threshold at this exponent


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[model]\nN = 5\nm = 2\n")
    assert main(["solve", "--config", str(bad)]) == EXIT_PARAMETER

    ok = tmp_path / "ok.ini"
    ok.write_text(FAST_SOLVE.format(out=tmp_path / "runs"))
    assert main(["solve", "--config", str(ok)]) == EXIT_OK
    assert main(["probe", "--config", str(ok), "--set", "run.widths=1.0,2.0"]) == EXIT_OK
