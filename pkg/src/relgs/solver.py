"""Ground-state computation on the Nehari manifold.

The default scheme is a normalized fixed-point (Petviashvili-type)
iteration: invert the linear part on the nonlinearity, then rescale the
result onto the Nehari manifold in closed form.  Rescaling removes the one
unstable direction of the plain fixed-point map (the field itself), so every
iterate stays on the constraint set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bounds import tent
from .diagnostics import DiagnosticsReport, diagnose, index_distance_sq
from .energy import EnergyBreakdown, NehariError, energy, ground_energy, nehari_project
from .fieldio import read_field
from .spectral import (
    Grid,
    ModelParams,
    RealField,
    apply_operator,
    apply_resolvent,
    inner,
    operator_multiplier,
)

log = logging.getLogger(__name__)

INIT_CHOICES = ("gaussian", "tent", "file")
SCHEME_CHOICES = ("petviashvili", "gradient")
TRACE_COLUMNS = ("iter", "c_m_estimate", "residual", "nehari_residual", "linf")


class SolverCollapseError(RuntimeError):
    """The iteration collapsed to the zero field (box or grid too small)."""


class ContinuationError(RuntimeError):
    """A solve inside a continuation failed; ``results`` holds those finished."""

    def __init__(self, message, results):
        super().__init__(message)
        self.results = results


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tol_residual: float = 1e-9
    tol_energy: float = 1e-10
    rearrange_every: int = 0
    init: str = "gaussian"
    init_file: str | None = None
    damping: float = 1.0
    scheme: str = "petviashvili"
    step: float = 0.05
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters >= 1 required")
        if not (self.tol_residual > 0 and self.tol_energy > 0):
            raise ValueError("tolerances must be positive")
        if self.rearrange_every < 0:
            raise ValueError("rearrange_every >= 0 required")
        if self.init not in INIT_CHOICES:
            raise ValueError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")
        if self.init == "file" and not self.init_file:
            raise ValueError("init = file needs init_file")
        if not 0 < self.damping <= 1:
            raise ValueError("damping in (0,1] required")
        if self.scheme not in SCHEME_CHOICES:
            raise ValueError(f"scheme must be one of {SCHEME_CHOICES}, got {self.scheme!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    field: RealField
    energy: EnergyBreakdown
    c_m: float
    iterations: int
    residual: float
    diagnostics: DiagnosticsReport
    converged: bool
    params: ModelParams | None = None
    trace: list = field(default_factory=list, repr=False)


def nonlinearity(u: RealField, p: float) -> RealField:
    v = u.values
    return RealField(u.grid, np.abs(v) ** (p - 2) * v)


def gradient(u: RealField, params: ModelParams) -> RealField:
    """L^2 gradient of I_m: [(-Delta+m^2)^s - m^(2s) + mu] u - |u|^(p-2) u."""
    v = u.values
    lin = apply_operator(u, params).values + params.mu * v
    return RealField(u.grid, lin - np.abs(v) ** (params.p - 2) * v)


def relative_residual(u: RealField, params: ModelParams, e: EnergyBreakdown | None = None):
    """|gradient(u)|_2 / ||u||_e."""
    e = energy(u, params) if e is None else e
    g = gradient(u, params)
    return math.sqrt(inner(g, g)) / math.sqrt(e.norm_e_sq)


def gradient_step_limit(params: ModelParams, grid: Grid) -> float:
    """2 / (largest eigenvalue of the linear part): explicit-step stability bound."""
    top = operator_multiplier(grid.k_sq.max(), params) + params.mu
    return float(2.0 / top)


def _project(u: RealField, params: ModelParams) -> RealField:
    return nehari_project(u, params)[1]


def iterate_once(u: RealField, params: ModelParams, config: SolverConfig) -> RealField:
    """One normalized step; the result lies on the Nehari manifold."""
    if config.scheme == "gradient":
        step = u - config.step * gradient(u, params)
    else:
        step = apply_resolvent(nonlinearity(u, params.p), params)
    new = _project(step, params)
    if config.damping < 1:
        new = _project((1 - config.damping) * u + config.damping * new, params)
    return new


def rearrange_decreasing(u: RealField) -> RealField:
    """Discrete symmetric-decreasing rearrangement of |u| about the box center.

    The values of |u| are sorted in decreasing order and placed on grid
    nodes sorted by distance from the center node.  Both sorts are stable,
    so ties are broken by flat grid index.  The output is a permutation of
    |u|: every L^q norm is preserved exactly.
    """
    vals = np.abs(u.values).reshape(-1)
    by_value = np.argsort(-vals, kind="stable")
    by_distance = np.argsort(index_distance_sq(u.grid).reshape(-1), kind="stable")
    out = np.empty_like(vals)
    out[by_distance] = vals[by_value]
    return RealField(u.grid, out)


def initial_field(grid: Grid, config: SolverConfig) -> RealField:
    width = grid.L / 20
    if config.init == "gaussian":
        r = grid.radius()
        u = RealField(grid, np.exp(-0.5 * (r / width) ** 2))
    elif config.init == "tent":
        u = RealField(grid, tent(grid.radius() / width))
    else:
        u = read_field(config.init_file)
        if u.grid != grid:
            raise ValueError(f"init_file grid {u.grid} does not match {grid}")
    if config.noise > 0:
        rng = np.random.default_rng(config.seed)
        scale = np.abs(u.values).max()
        u = RealField(grid, u.values + config.noise * scale * rng.standard_normal(grid.shape))
    return u


def _snapshot(u: RealField, params: ModelParams):
    e = energy(u, params)
    res = relative_residual(u, params, e)
    c = (0.5 - 1 / params.p) * e.lp_p
    return e, res, c


def solve_ground_state(
    params: ModelParams,
    grid: Grid,
    config: SolverConfig = SolverConfig(),
    initial: RealField | None = None,
) -> GroundStateResult:
    """Minimize I_m over the Nehari manifold starting from ``initial`` or config.init.

    Non-convergence returns the best iterate (smallest residual) with
    ``converged=False``.  A zero starting field raises
    :class:`~relgs.energy.NehariError`; collapse of the iterates to zero
    raises :class:`SolverCollapseError`.
    """
    if params.N != grid.N:
        raise ValueError(f"params.N={params.N} but grid.N={grid.N}")
    if config.scheme == "gradient":
        limit = gradient_step_limit(params, grid)
        if config.step > limit:
            log.warning("gradient step %.3g exceeds the explicit stability limit %.3g", config.step, limit)
    u = initial_field(grid, config) if initial is None else initial
    u = _project(u, params)
    e, res, c = _snapshot(u, params)
    trace = [(0, c, res, e.nehari / e.norm_e_sq, float(np.abs(u.values).max()))]
    best = (res, u, 0)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        try:
            u = iterate_once(u, params, config)
            if config.rearrange_every and it % config.rearrange_every == 0:
                u = _project(rearrange_decreasing(u), params)
        except NehariError as exc:
            raise SolverCollapseError(
                f"iterate collapsed to zero at iteration {it}; enlarge the box or refine the grid"
            ) from exc
        c_prev = c
        e, res, c = _snapshot(u, params)
        linf = float(np.abs(u.values).max())
        trace.append((it, c, res, e.nehari / e.norm_e_sq, linf))
        if not math.isfinite(res) or linf < 1e-12:
            raise SolverCollapseError(f"iterate degenerated at iteration {it}")
        if c > c_prev * (1 + 1e-8):
            log.debug("energy increased at iteration %d: %.17g -> %.17g", it, c_prev, c)
        if res < best[0]:
            best = (res, u, it)
        if res <= config.tol_residual and abs(c - c_prev) <= config.tol_energy * c:
            converged = True
            break
    if not converged:
        res, u, _ = best
        log.warning(
            "no convergence after %d iterations (best residual %.3e)", config.max_iters, res
        )
        e = energy(u, params)
    return GroundStateResult(
        field=u,
        energy=e,
        c_m=ground_energy(u, params),
        iterations=it,
        residual=res,
        diagnostics=diagnose(u, params),
        converged=converged,
        params=params,
        trace=trace,
    )


def continuation_m(
    params_base: ModelParams,
    m_values,
    grid: Grid,
    config: SolverConfig = SolverConfig(),
) -> list[GroundStateResult]:
    """Solve along decreasing masses, warm-starting each solve from the previous field."""
    m_values = [float(m) for m in m_values]
    if any(b >= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("m_values must be strictly decreasing")
    results: list[GroundStateResult] = []
    initial = None
    for m in m_values:
        params = params_base.with_mass(m)
        try:
            result = solve_ground_state(params, grid, config, initial=initial)
        except Exception as exc:
            raise ContinuationError(f"solve failed at m={m}: {exc}", results) from exc
        results.append(result)
        initial = result.field
    return results


def with_config(config: SolverConfig, **changes) -> SolverConfig:
    return replace(config, **changes)
