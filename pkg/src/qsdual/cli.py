"""Command-line entry points, run-directory persistence, and config formats.

Configs are flat INI-style sections ([model], [grid], [flow], [run]) where
every key maps to exactly one documented field; unknown keys are hard errors
so a typo in an exponent study cannot pass silently.  ``--set section.key=v``
overrides are applied after the file parse.  Every command writes an isolated
timestamped run directory containing the exact parsed config, per-iteration
diagnostics (solves), full-precision field dumps, and a summary.json with a
fixed key set.  File writes are whole-file atomic (write temp, then rename).

Exit status contract: 0 success, 2 parameter/config error, 3 numeric or
convergence failure, 4 multisolve shortfall (fewer pairs than requested).
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .certify import (
    certify_dual,
    check_equivalence,
    default_widths,
    lambda_threshold_scan,
    negativity_probe,
)
from .dualmap import DualMap
from .errors import ConfigError, NumericError, ParameterError
from .flow import FlowConfig, antisymmetric_start, multisolve, project_mass, separated_pair_start, solve
from .functionals import csv_header, dual_energy, sign_change
from .grid import SECTOR_ANTISYMMETRIC, SECTOR_UNRESTRICTED, ModelParams, build_grid, dump_field
from . import kernels

COMMANDS = ("solve", "multisolve", "certify-dual", "check-equivalence", "probe", "sweep")

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NUMERIC = 3
EXIT_SHORTFALL = 4

_OUTPUT_ROOT_ENV = "QSDUAL_OUTPUT_ROOT"

_DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.geomspace(1e-2, 1e4, 13))


@dataclass(frozen=True)
class RunConfig:
    """Fully validated configuration for one command invocation."""

    model: ModelParams
    grid_L: float = 8.0
    grid_n: int = 128
    flow: FlowConfig = FlowConfig()
    output_dir: str = "runs"
    seed: int = 0
    sector: str = SECTOR_ANTISYMMETRIC
    k: int = 3
    max_starts: int = 0  # 0 = automatic (4k + 2)
    sample_count: int = 10000
    trials: int = 5
    grid_sizes: tuple[int, ...] = (64, 128, 256)
    lambda_grid: tuple[float, ...] = _DEFAULT_LAMBDA_GRID
    widths: tuple[float, ...] | None = None  # None = automatic, up to L/6
    start: str = "pair"
    start_width: float = 0.0  # 0 = pick the best probe width

    def __post_init__(self):
        if self.sector not in (SECTOR_ANTISYMMETRIC, SECTOR_UNRESTRICTED):
            raise ConfigError(f"sector must be antisymmetric or unrestricted, got {self.sector!r}")
        if self.start not in ("pair", "random"):
            raise ConfigError(f"start must be 'pair' or 'random', got {self.start!r}")
        if self.grid_n < 16:
            raise ParameterError(f"grid n must be at least 16, got {self.grid_n}")
        if not (self.grid_L > 0):
            raise ParameterError(f"grid L must be positive, got {self.grid_L}")


# ---------------------------------------------------------------------------
# config text format
# ---------------------------------------------------------------------------

_MODEL_KEYS = {"N": int, "m": int, "p": float, "lambda": float}
_GRID_KEYS = {"L": float, "n": int}
_FLOW_KEYS = {
    "step_init": float,
    "backtrack_factor": float,
    "armijo_c": float,
    "tol_grad": float,
    "tol_mass": float,
    "max_iters": int,
    "deflation_strength": float,
    "precondition": bool,
    "precond_shift": float,
    "step_max": float,
}
_RUN_KEYS = {
    "output_dir": str,
    "seed": int,
    "sector": str,
    "k": int,
    "max_starts": int,
    "sample_count": int,
    "trials": int,
    "grid_sizes": "int_list",
    "lambda_grid": "float_list",
    "widths": "width_list",
    "start": str,
    "start_width": float,
}
_SECTIONS = {"model": _MODEL_KEYS, "grid": _GRID_KEYS, "flow": _FLOW_KEYS, "run": _RUN_KEYS}


def _parse_value(kind, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is str:
            return raw
        if kind == "int_list":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == "float_list":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "width_list":
            if raw.lower() == "auto":
                return None
            return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {where} = {raw!r}") from exc
    raise ConfigError(f"unhandled config type for {where}")


def parse_config(text: str, overrides: list[str] | None = None) -> RunConfig:
    """Parse and validate the key-value config text, applying --set overrides."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep key case (N vs n matters)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    raw: dict[str, dict[str, str]] = {s: dict(cp.items(s)) for s in cp.sections()}
    for sec in raw:
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        sec, name = key.split(".", 1)
        raw.setdefault(sec.strip(), {})[name.strip()] = value
    parsed: dict[str, dict] = {}
    for sec, entries in raw.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        schema = _SECTIONS[sec]
        parsed[sec] = {}
        for key, value in entries.items():
            if key not in schema:
                raise ConfigError(f"unknown config key [{sec}] {key}")
            parsed[sec][key] = _parse_value(schema[key], value, f"[{sec}] {key}")

    model_kw = parsed.get("model", {})
    model = ModelParams(
        N=model_kw.get("N", 4),
        m=model_kw.get("m", 2),
        p=model_kw.get("p", 3.0),
        lam=model_kw.get("lambda", 10.0),
    )
    flow_kw = parsed.get("flow", {})
    run_kw = dict(parsed.get("run", {}))
    seed = run_kw.get("seed", 0)
    flow = FlowConfig(seed=seed, **flow_kw)
    grid_kw = parsed.get("grid", {})
    kwargs = dict(
        model=model,
        grid_L=grid_kw.get("L", 8.0),
        grid_n=grid_kw.get("n", 128),
        flow=flow,
        seed=seed,
    )
    if "output_dir" not in run_kw and _OUTPUT_ROOT_ENV in os.environ:
        run_kw["output_dir"] = os.environ[_OUTPUT_ROOT_ENV]
    run_kw.pop("seed", None)
    kwargs.update(run_kw)
    return RunConfig(**kwargs)


def serialize_config(config: RunConfig) -> str:
    """Inverse of parse_config: emits every key at full precision."""

    def fmt(value):
        if value is None:
            return "auto"
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        if isinstance(value, tuple):
            return ",".join(fmt(v) for v in value)
        return str(value)

    out = io.StringIO()
    out.write("[model]\n")
    out.write(f"N = {config.model.N}\nm = {config.model.m}\n")
    out.write(f"p = {fmt(config.model.p)}\nlambda = {fmt(config.model.lam)}\n\n")
    out.write("[grid]\n")
    out.write(f"L = {fmt(config.grid_L)}\nn = {config.grid_n}\n\n")
    out.write("[flow]\n")
    for key in _FLOW_KEYS:
        out.write(f"{key} = {fmt(getattr(config.flow, key))}\n")
    out.write("\n[run]\n")
    out.write(f"output_dir = {config.output_dir}\nseed = {config.seed}\nsector = {config.sector}\n")
    out.write(f"k = {config.k}\nmax_starts = {config.max_starts}\nsample_count = {config.sample_count}\n")
    out.write(f"trials = {config.trials}\ngrid_sizes = {fmt(config.grid_sizes)}\n")
    out.write(f"lambda_grid = {fmt(config.lambda_grid)}\nwidths = {fmt(config.widths)}\n")
    out.write(f"start = {config.start}\nstart_width = {fmt(config.start_width)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# atomic file helpers
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    _atomic_write(path, "\n".join([header, *rows]) + "\n")


def _make_run_dir(config: RunConfig, cmd: str) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    run_dir = Path(config.output_dir) / f"{stamp}-{cmd}"
    run_dir.mkdir(parents=True, exist_ok=False)
    return run_dir


def _base_summary(cmd: str, config: RunConfig) -> dict:
    return {
        "command": cmd,
        "params": {
            "N": config.model.N,
            "m": config.model.m,
            "p": config.model.p,
            "lambda": config.model.lam,
            "L": config.grid_L,
            "n": config.grid_n,
            "seed": config.seed,
            "backend": kernels.BACKEND,
        },
        "converged": None,
        "energy_I": None,
        "energy_J": None,
        "mass": None,
        "mu": None,
        "residual_norm": None,
        "sign_change": None,
        "constants": {},
    }


def _fill_from_report(summary: dict, report) -> None:
    d = report.diagnostics
    summary["converged"] = bool(report.converged)
    summary["energy_I"] = d.energy_I
    summary["energy_J"] = d.energy_J
    summary["mass"] = d.mass
    summary["mu"] = d.mu
    summary["residual_norm"] = d.residual_norm
    lo, hi = sign_change(report.field)
    summary["sign_change"] = {"min": lo, "max": hi}
    summary["constants"]["boundary_max"] = report.boundary_max
    summary["constants"]["iterations"] = report.iterations
    summary["constants"]["projected_grad_norm"] = d.projected_grad_norm


def _start_field(config: RunConfig, grid, dual: DualMap):
    if config.start == "random":
        return antisymmetric_start(grid, config.seed)
    width = config.start_width
    if width <= 0.0:
        best = None
        for b in default_widths(grid):
            trial = separated_pair_start(grid, b)
            projected, _ = project_mass(trial, config.model.lam, dual)
            energy = dual_energy(projected, dual, config.model)
            if best is None or energy < best[0]:
                best = (energy, b)
        width = best[1]
    return separated_pair_start(grid, width)


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _cmd_solve(config: RunConfig, run_dir: Path) -> int:
    dual = DualMap()
    grid = build_grid(config.model, config.grid_L, config.grid_n)
    v0 = _start_field(config, grid, dual)
    report = solve(v0, config.model, config.flow, dual, sector=config.sector)
    _write_csv(run_dir / "diagnostics.csv", csv_header(), (d.csv_row() for d in report.trace))
    dump_field(report.field, config.model, run_dir / "solution-0.field")
    summary = _base_summary("solve", config)
    _fill_from_report(summary, report)
    _write_json(run_dir / "summary.json", summary)
    print(
        f"solve: converged={report.converged} iterations={report.iterations} "
        f"energy_I={report.diagnostics.energy_I:.6g} mu={report.diagnostics.mu:.6g} "
        f"residual={report.diagnostics.residual_norm:.3e}"
    )
    return EXIT_OK if report.converged else EXIT_NUMERIC


def _cmd_multisolve(config: RunConfig, run_dir: Path) -> int:
    dual = DualMap()
    grid = build_grid(config.model, config.grid_L, config.grid_n)
    max_starts = config.max_starts if config.max_starts > 0 else None
    result = multisolve(config.k, config.model, config.flow, dual, grid, max_starts=max_starts)
    summary = _base_summary("multisolve", config)
    solutions = []
    for i, report in enumerate(result.reports):
        _write_csv(run_dir / f"diagnostics-{i}.csv", csv_header(), (d.csv_row() for d in report.trace))
        dump_field(report.field, config.model, run_dir / f"solution-{i}.field")
        lo, hi = sign_change(report.field)
        solutions.append(
            {
                "energy_I": report.diagnostics.energy_I,
                "energy_J": report.diagnostics.energy_J,
                "mu": report.diagnostics.mu,
                "mass": report.diagnostics.mass,
                "residual_norm": report.diagnostics.residual_norm,
                "sign_change": {"min": lo, "max": hi},
                "iterations": report.iterations,
            }
        )
    if result.reports:
        _fill_from_report(summary, result.reports[0])
        # the plain diagnostics.csv mirrors the best (lowest-energy) solution
        _write_csv(
            run_dir / "diagnostics.csv", csv_header(), (d.csv_row() for d in result.reports[0].trace)
        )
    summary["solutions"] = solutions
    summary["shortfall"] = bool(result.shortfall)
    summary["starts_used"] = result.starts_used
    summary["requested_k"] = config.k
    _write_json(run_dir / "summary.json", summary)
    print(
        f"multisolve: found {len(result.reports)}/{config.k} distinct pairs in "
        f"{result.starts_used} starts; energies "
        + ", ".join(f"{r.diagnostics.energy_I:.6g}" for r in result.reports)
    )
    return EXIT_SHORTFALL if result.shortfall else EXIT_OK


def _cmd_certify_dual(config: RunConfig, run_dir: Path) -> int:
    dual = DualMap()
    report = certify_dual(dual, config.sample_count)
    summary = _base_summary("certify-dual", config)
    summary.update(report.as_dict())
    summary["constants"].update(report.constants)
    _write_json(run_dir / "summary.json", summary)
    print(report.render_table())
    return EXIT_OK if report.all_passed else EXIT_NUMERIC


def _cmd_check_equivalence(config: RunConfig, run_dir: Path) -> int:
    report = check_equivalence(
        config.model, list(config.grid_sizes), config.trials, config.seed, DualMap(), L=config.grid_L
    )
    summary = _base_summary("check-equivalence", config)
    summary.update(report.as_dict())
    summary["constants"].update(report.constants)
    _write_json(run_dir / "summary.json", summary)
    print(report.render_table())
    return EXIT_OK if report.all_passed else EXIT_NUMERIC


def _cmd_probe(config: RunConfig, run_dir: Path) -> int:
    dual = DualMap()
    grid = build_grid(config.model, config.grid_L, config.grid_n)
    widths = list(config.widths) if config.widths is not None else default_widths(grid)
    best_energy, best_width, curve = negativity_probe(config.model, dual, widths, grid, return_curve=True)
    _write_csv(run_dir / "curve.csv", "width,energy_I", (f"{b!r},{e!r}" for b, e in curve))
    summary = _base_summary("probe", config)
    summary["energy_I"] = best_energy
    summary["constants"]["best_width"] = best_width
    summary["constants"]["negative"] = bool(best_energy < 0)
    _write_json(run_dir / "summary.json", summary)
    print(f"probe: best energy_I={best_energy:.6g} at width={best_width:g} (negative={best_energy < 0})")
    return EXIT_OK


def _cmd_sweep(config: RunConfig, run_dir: Path) -> int:
    dual = DualMap()
    grid = build_grid(config.model, config.grid_L, config.grid_n)
    widths = list(config.widths) if config.widths is not None else None
    scan = lambda_threshold_scan(config.model, dual, list(config.lambda_grid), grid, widths)
    _write_csv(run_dir / "curve.csv", "lambda,best_I", (f"{lam!r},{e!r}" for lam, e in scan.curve))
    summary = _base_summary("sweep", config)
    summary["lambda_star"] = scan.lambda_star
    summary["constants"]["upward_closed"] = bool(scan.upward_closed)
    _write_json(run_dir / "summary.json", summary)
    if not scan.upward_closed:
        print("warning: probe negativity set is not upward-closed on this grid", file=sys.stderr)
    star = "none" if scan.lambda_star is None else f"{scan.lambda_star:g}"
    print(f"sweep: lambda_star={star} over {len(scan.curve)} grid points")
    return EXIT_OK


_DISPATCH = {
    "solve": _cmd_solve,
    "multisolve": _cmd_multisolve,
    "certify-dual": _cmd_certify_dual,
    "check-equivalence": _cmd_check_equivalence,
    "probe": _cmd_probe,
    "sweep": _cmd_sweep,
}


def run_command(cmd: str, config: RunConfig) -> int:
    """Execute one command into a fresh run directory; returns the exit status."""
    if cmd not in _DISPATCH:
        raise ConfigError(f"unknown command {cmd!r}; expected one of {', '.join(COMMANDS)}")
    run_dir = _make_run_dir(config, cmd)
    _atomic_write(run_dir / "config.echo", serialize_config(config))
    print(f"run directory: {run_dir}")
    return _DISPATCH[cmd](config, run_dir)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qsdual",
        description="Normalized sign-changing solutions of a quasilinear Schrodinger equation "
        "via the dual transform: solve, certify, probe.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", default=None, help="key-value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config entry (applied after the file parse)",
    )
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        config = parse_config(text, args.overrides)
        return run_command(args.command, config)
    except (ParameterError, ConfigError) as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
