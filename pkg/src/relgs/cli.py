"""Batch driver: flat key-value configs, experiment runs and CSV output.

Config format, one ``key = value`` per line, ``#`` starts a comment::

    run.experiment = solve
    model.s = 0.5
    model.m = 1
    model.mu = 2
    model.p = 3
    grid.n = 4096
    grid.L = 80

Every run writes ``summary.csv`` into the output directory.  Its first line
is a ``#`` comment carrying a timestamp; the rest is a header row followed
by data rows and is byte-identical for identical (config, seed).  Solves
also write ``run_XXX/trace.csv`` and ``run_XXX/field.relgs``.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .bessel import KernelParams, apply_operator_quadrature
from .bounds import (
    BoundsRangeError,
    BoundsReport,
    admissible_m_max,
    upper_bound_delta,
    with_lower_witness,
)
from .diagnostics import DiagnosticsReport
from .energy import EnergyBreakdown
from .extension import (
    ExtrapolationError,
    QuadratureError,
    dn_map_check,
    extension_energy_per_mode,
    kappa_s,
)
from .fieldio import write_field
from .solver import (
    TRACE_COLUMNS,
    GroundStateResult,
    SolverConfig,
    solve_ground_state,
)
from .spectral import Grid, ModelParams, RealField, apply_operator, default_box_length

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

EXPERIMENTS = ("solve", "continuation", "sweep", "verify-extension", "verify-kernel", "bounds")
SWEEP_PARAMS = ("s", "m", "mu", "p")
SUMMARY_NAME = "summary.csv"
FIELD_NAME = "field.relgs"
TRACE_NAME = "trace.csv"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _float_list(text: str) -> tuple[float, ...]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(t) for t in items)


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


# key -> converter
KEYS = {
    "run.experiment": str,
    "run.m_values": _float_list,
    "run.output_dir": str,
    "run.seed": _int,
    "model.s": float,
    "model.m": float,
    "model.mu": float,
    "model.p": float,
    "model.N": _int,
    "grid.n": _int,
    "grid.L": float,
    "solver.max_iters": _int,
    "solver.tol_residual": float,
    "solver.tol_energy": float,
    "solver.rearrange_every": _int,
    "solver.init": str,
    "solver.init_file": str,
    "solver.damping": float,
    "solver.scheme": str,
    "solver.step": float,
    "solver.noise": float,
    "sweep.param": str,
    "sweep.values": _float_list,
    "kernel.quad_points": _int,
    "kernel.cutoff_radius": float,
    "kernel.sample_points": _int,
    "kernel.sample_radius": float,
    "kernel.tol": float,
    "verify.s_values": _float_list,
    "verify.rho_values": _float_list,
    "verify.tol": float,
}


@dataclass(frozen=True)
class KernelCheck:
    quad_points: int | None = None
    cutoff_radius: float | None = None
    sample_points: int = 10
    sample_radius: float = 2.0
    tol: float = 1e-3


@dataclass(frozen=True)
class ExtensionCheck:
    s_values: tuple[float, ...] = (0.25, 0.5, 0.75)
    rho_values: tuple[float, ...] = (0.5, 1.0, 5.0)
    tol: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: ModelParams | None
    grid: Grid | None
    solver: SolverConfig = SolverConfig()
    m_values: tuple[float, ...] | None = None
    output_dir: Path = Path("relgs-output")
    seed: int = 0
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] | None = None
    kernel: KernelCheck = field(default_factory=KernelCheck)
    verify: ExtensionCheck = field(default_factory=ExtensionCheck)


def _read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        pairs[key] = value
    return pairs


def _convert(pairs: dict[str, str]) -> dict:
    out = {}
    for key, text in pairs.items():
        try:
            out[key] = KEYS[key](text)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


def _require(values: dict, key: str, experiment: str):
    if key not in values:
        raise ConfigError(f"missing required key {key} for experiment {experiment!r}")
    return values[key]


def _model(values: dict, experiment: str, m_default: float | None = None) -> ModelParams:
    s = _require(values, "model.s", experiment)
    if "model.m" in values or m_default is None:
        m = _require(values, "model.m", experiment)
    else:
        m = m_default
    mu = _require(values, "model.mu", experiment)
    p = _require(values, "model.p", experiment)
    N = values.get("model.N", 1)
    try:
        return ModelParams(s=s, m=m, mu=mu, p=p, N=N)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _grid(values: dict, experiment: str, model: ModelParams, m_for_box: float) -> Grid:
    n = _require(values, "grid.n", experiment)
    L = values.get("grid.L")
    if L is None:
        L = default_box_length(model.with_mass(m_for_box))
        log.warning("grid.L not set; using heuristic box length L = %.6g", L)
    try:
        return Grid(n=n, L=L, N=model.N)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _solver(values: dict, seed: int) -> SolverConfig:
    kwargs = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith("solver.")}
    try:
        return SolverConfig(seed=seed, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate a flat ``key = value`` run configuration.

    ``experiment`` (from the command line) must agree with ``run.experiment``
    when both are given.  Raises :class:`ConfigError` naming the offending key.
    """
    values = _convert(_read_pairs(text))
    name = values.get("run.experiment", experiment)
    if name is None:
        raise ConfigError("missing required key run.experiment")
    if experiment is not None and name != experiment:
        raise ConfigError(
            f"run.experiment = {name} conflicts with the requested experiment {experiment}"
        )
    if name not in EXPERIMENTS:
        raise ConfigError(f"run.experiment must be one of {EXPERIMENTS}, got {name!r}")
    seed = values.get("run.seed", 0)
    m_values = values.get("run.m_values")
    if m_values is not None:
        if any(m < 0 for m in m_values):
            raise ConfigError("run.m_values: masses must be nonnegative")
        if any(b >= a for a, b in zip(m_values, m_values[1:])):
            raise ConfigError("run.m_values must be strictly decreasing")

    model = grid = None
    sweep_param = values.get("sweep.param")
    sweep_values = values.get("sweep.values")
    if name == "continuation":
        m_values = _require(values, "run.m_values", name)
        model = _model(values, name, m_default=m_values[0])
        grid = _grid(values, name, model, m_values[-1])
    elif name in ("solve", "sweep", "verify-kernel", "bounds"):
        model = _model(values, name)
        if name != "bounds" or m_values is not None:
            m_box = min(m_values) if m_values else model.m
            grid = _grid(values, name, model, m_box)
    if name == "sweep":
        sweep_param = _require(values, "sweep.param", name)
        sweep_values = _require(values, "sweep.values", name)
        if sweep_param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param must be one of {SWEEP_PARAMS}, got {sweep_param!r}")
        for v in sweep_values:
            try:
                replace(model, **{sweep_param: v})
            except ValueError as exc:
                raise ConfigError(f"sweep.values: {sweep_param}={v}: {exc}") from None
    if name == "verify-kernel" and not model.m > 0:
        raise ConfigError("model.m: verify-kernel needs m > 0 (the kernel formula uses m)")

    kernel = KernelCheck(
        quad_points=values.get("kernel.quad_points"),
        cutoff_radius=values.get("kernel.cutoff_radius"),
        sample_points=values.get("kernel.sample_points", 10),
        sample_radius=values.get("kernel.sample_radius", 2.0),
        tol=values.get("kernel.tol", 1e-3),
    )
    if kernel.quad_points is not None and kernel.quad_points < 16:
        raise ConfigError(f"kernel.quad_points >= 16 required, got {kernel.quad_points}")
    if kernel.sample_points < 1:
        raise ConfigError("kernel.sample_points >= 1 required")
    verify = ExtensionCheck(
        s_values=values.get("verify.s_values", ExtensionCheck.s_values),
        rho_values=values.get("verify.rho_values", ExtensionCheck.rho_values),
        tol=values.get("verify.tol", 1e-6),
    )
    if not all(0 < s < 1 for s in verify.s_values):
        raise ConfigError("verify.s_values: s in (0,1) required")
    if not all(r > 0 for r in verify.rho_values):
        raise ConfigError("verify.rho_values: rho > 0 required")

    return RunConfig(
        experiment=name,
        model=model,
        grid=grid,
        solver=_solver(values, seed),
        m_values=m_values,
        output_dir=Path(values.get("run.output_dir", "relgs-output")),
        seed=seed,
        sweep_param=sweep_param,
        sweep_values=sweep_values,
        kernel=kernel,
        verify=verify,
    )


# ---------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_summary(path: Path, header: list[str], rows: list[list], comment: str) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO()
    buf.write(f"# {comment} generated {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_trace(path: Path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in trace:
            writer.writerow([_fmt(v) for v in row])


SOLVE_COLUMNS = (
    ["run", "s", "m", "mu", "p", "N", "n", "L", "c_m", "iterations", "residual", "converged"]
    + EnergyBreakdown.csv_header()
    + DiagnosticsReport.csv_header()
)


def _solve_row(label: str, result: GroundStateResult, grid: Grid) -> list:
    p = result.params
    return (
        [label, p.s, p.m, p.mu, p.p, p.N, grid.n, grid.L, result.c_m, result.iterations,
         result.residual, result.converged]
        + result.energy.csv_row()
        + result.diagnostics.csv_row()
    )


def _persist(result: GroundStateResult, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    write_trace(run_dir / TRACE_NAME, result.trace)
    write_field(result.field, run_dir / FIELD_NAME)


def _solve_job(params: ModelParams, grid: Grid, solver: SolverConfig, run_dir: Path, initial=None):
    result = solve_ground_state(params, grid, solver, initial=initial)
    _persist(result, run_dir)
    return result


def _executor(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None


# ---------------------------------------------------------------- experiments


def _run_solve(cfg: RunConfig, out: Path, jobs: int) -> int:
    result = _solve_job(cfg.model, cfg.grid, cfg.solver, out / "run_000")
    write_summary(out / SUMMARY_NAME, SOLVE_COLUMNS, [_solve_row("run_000", result, cfg.grid)], "relgs solve")
    print(f"solve: c_m = {result.c_m:.12g}, converged = {result.converged}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _run_sweep(cfg: RunConfig, out: Path, jobs: int) -> int:
    labels, tasks = [], []
    for i, v in enumerate(cfg.sweep_values):
        params = replace(cfg.model, **{cfg.sweep_param: v})
        label = f"run_{i:03d}"
        labels.append(label)
        tasks.append((params, cfg.grid, cfg.solver, out / label))
    pool = _executor(jobs)
    if pool is None:
        results = [_solve_job(*t) for t in tasks]
    else:
        with pool:
            futures = [pool.submit(_solve_job, *t) for t in tasks]
            results = [f.result() for f in futures]
    rows = [_solve_row(lab, r, cfg.grid) for lab, r in zip(labels, results)]
    write_summary(out / SUMMARY_NAME, SOLVE_COLUMNS, rows, f"relgs sweep over {cfg.sweep_param}")
    n_conv = sum(r.converged for r in results)
    print(f"sweep: {n_conv}/{len(results)} converged")
    return EXIT_OK if n_conv == len(results) else EXIT_NOT_CONVERGED


def _delta_or_nan(params: ModelParams) -> float:
    try:
        return upper_bound_delta(params).delta
    except BoundsRangeError:
        return math.nan


def _continuation(cfg: RunConfig, out: Path):
    """Warm-started solves along cfg.m_values; each run persisted as it finishes."""
    results, initial = [], None
    for i, m in enumerate(cfg.m_values):
        result = _solve_job(cfg.model.with_mass(m), cfg.grid, cfg.solver, out / f"run_{i:03d}", initial)
        results.append(result)
        initial = result.field
    return results


CONTINUATION_COLUMNS = SOLVE_COLUMNS + ["kind", "delta", "within_bound", "rel_diff_to_last"]


def _run_continuation(cfg: RunConfig, out: Path, jobs: int) -> int:
    limit_params = cfg.model.with_mass(0.0)
    limit_dir = out / "run_limit_m0"
    pool = _executor(jobs)
    if pool is None:
        results = _continuation(cfg, out)
        limit = _solve_job(limit_params, cfg.grid, cfg.solver, limit_dir)
    else:
        with pool:
            fut = pool.submit(_solve_job, limit_params, cfg.grid, cfg.solver, limit_dir)
            results = _continuation(cfg, out)
            limit = fut.result()
    rows = []
    for i, r in enumerate(results):
        delta = _delta_or_nan(r.params)
        ok = bool(math.isnan(delta) or r.c_m <= delta)
        rows.append(_solve_row(f"run_{i:03d}", r, cfg.grid) + ["continuation", delta, ok, math.nan])
    rel = abs(results[-1].c_m - limit.c_m) / limit.c_m
    rows.append(
        _solve_row("run_limit_m0", limit, cfg.grid) + ["limit", _delta_or_nan(limit_params), True, rel]
    )
    write_summary(out / SUMMARY_NAME, CONTINUATION_COLUMNS, rows, "relgs continuation")
    print(
        f"continuation: c_m(m={results[-1].params.m:g}) = {results[-1].c_m:.12g}, "
        f"direct m=0: {limit.c_m:.12g}, relative difference {rel:.3e}"
    )
    all_results = results + [limit]
    return EXIT_OK if all(r.converged for r in all_results) else EXIT_NOT_CONVERGED


BOUNDS_COLUMNS = ["s", "m", "mu", "p", "N", "c_m", "converged", "within_bound"] + BoundsReport.csv_header()


def _run_bounds(cfg: RunConfig, out: Path, jobs: int) -> int:
    model = cfg.model
    try:
        report = upper_bound_delta(model)
    except BoundsRangeError as exc:
        raise ConfigError(f"model.m: {exc}") from None
    rows = [[model.s, model.m, model.mu, model.p, model.N, math.nan, False, True] + report.csv_row()]
    status = EXIT_OK
    if cfg.m_values is not None:
        m_max = admissible_m_max(model)
        for r in _continuation(cfg, out):
            p = r.params
            if p.m > m_max * (1 + 1e-12):
                continue
            rep = report
            if r.converged:
                rep = with_lower_witness(report, r, p)
            ok = r.c_m <= rep.delta
            if not ok:
                status = EXIT_VERIFY
            elif not r.converged and status == EXIT_OK:
                status = EXIT_NOT_CONVERGED
            rows.append([p.s, p.m, p.mu, p.p, p.N, r.c_m, r.converged, ok] + rep.csv_row())
    write_summary(out / SUMMARY_NAME, BOUNDS_COLUMNS, rows, "relgs bounds")
    print(report.as_text())
    return status


EXTENSION_COLUMNS = ["s", "rho", "kappa_s", "dn_rel_err", "energy_rel_err", "passed"]


def extension_row(s: float, rho: float, tol: float) -> list:
    target = kappa_s(s) * rho ** (2 * s)
    try:
        dn_err = dn_map_check(s, rho)
    except ExtrapolationError as exc:
        log.error("s=%g rho=%g: %s", s, rho, exc)
        dn_err = math.nan
    try:
        en_err = abs(extension_energy_per_mode(s, rho) - target) / target
    except QuadratureError as exc:
        log.error("s=%g rho=%g: %s", s, rho, exc)
        en_err = math.nan
    passed = bool(dn_err < tol and en_err < tol)
    return [s, rho, kappa_s(s), dn_err, en_err, passed]


def _run_verify_extension(cfg: RunConfig, out: Path, jobs: int) -> int:
    v = cfg.verify
    rows = [extension_row(s, rho, v.tol) for s in v.s_values for rho in v.rho_values]
    write_summary(out / SUMMARY_NAME, EXTENSION_COLUMNS, rows, "relgs verify-extension")
    failed = [r for r in rows if not r[-1]]
    print(f"verify-extension: {len(rows) - len(failed)}/{len(rows)} passed (tol {v.tol:g})")
    return EXIT_VERIFY if failed else EXIT_OK


KERNEL_COLUMNS = ["point", "x", "spectral", "quadrature", "rel_err"]


def kernel_check_rows(model: ModelParams, grid: Grid, check: KernelCheck) -> list[list]:
    """Spectral vs quadrature application on exp(-|x|^2) at sample points on the first axis.

    ``rel_err`` is measured against max |spectral| over the samples (relative L^inf).
    """
    u = RealField.from_function(grid, lambda *xs: np.exp(-sum(x * x for x in xs)))
    spec = apply_operator(u, model).values
    kp = KernelParams(model, quad_cutoff_radius=check.cutoff_radius, quad_points=check.quad_points)
    center = grid.n // 2
    offsets = np.linspace(-check.sample_radius, check.sample_radius, check.sample_points)
    samples = []
    for off in offsets:
        idx = [center] * grid.N
        idx[0] = center + int(round(off / grid.dx))
        samples.append(tuple(idx))
    spectral = np.array([spec[i] for i in samples])
    quad = np.array([apply_operator_quadrature(u, i, kp) for i in samples])
    scale = np.abs(spectral).max()
    return [
        [" ".join(map(str, i)), grid.x[i[0]], a, b, abs(a - b) / scale]
        for i, a, b in zip(samples, spectral, quad)
    ]


def _run_verify_kernel(cfg: RunConfig, out: Path, jobs: int) -> int:
    rows = kernel_check_rows(cfg.model, cfg.grid, cfg.kernel)
    write_summary(out / SUMMARY_NAME, KERNEL_COLUMNS, rows, "relgs verify-kernel")
    worst = max(r[-1] for r in rows)
    print(f"verify-kernel: max relative error {worst:.3e} (tol {cfg.kernel.tol:g})")
    return EXIT_OK if worst < cfg.kernel.tol else EXIT_VERIFY


RUNNERS = {
    "solve": _run_solve,
    "continuation": _run_continuation,
    "sweep": _run_sweep,
    "verify-extension": _run_verify_extension,
    "verify-kernel": _run_verify_kernel,
    "bounds": _run_bounds,
}


def run(cfg: RunConfig, jobs: int = 1) -> int:
    """Execute ``cfg`` and return the process exit status."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"run.output_dir: {out} is not writable ({exc})") from None
    return RUNNERS[cfg.experiment](cfg, out, jobs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relgs",
        description="Ground states of [(-Delta+m^2)^s - m^(2s)] u + mu u = |u|^(p-2) u.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, type=Path, help="flat key = value config file")
    parser.add_argument("--output", type=Path, help="output directory (overrides run.output_dir)")
    parser.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        try:
            text = args.config.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg = parse_config(text, experiment=args.experiment)
        if args.output is not None:
            cfg = replace(cfg, output_dir=args.output)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed, solver=replace(cfg.solver, seed=args.seed))
        return run(cfg, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "ExtensionCheck",
    "KernelCheck",
    "RunConfig",
    "build_parser",
    "kernel_check_rows",
    "main",
    "parse_config",
    "run",
]
