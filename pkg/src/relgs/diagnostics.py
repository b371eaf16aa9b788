"""Numerical checks of the qualitative properties of computed ground states.

These are observations on a grid (sign, radial symmetry about some point,
tail behaviour, pointwise equation residual), not proofs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .spectral import Grid, ModelParams, RealField, apply_operator, shift

SIGN_TOL = 1e-8
# bin maxima below this fraction of max|u| are treated as round-off
TAIL_FLOOR = 1e-12


class SignCheck(NamedTuple):
    one_signed: bool
    min: float
    max: float


class DecayReport(NamedTuple):
    tail_rate: float  # NaN when unresolved
    kind: str  # "exponential" (m > 0) or "algebraic" (m = 0)
    monotone: bool
    edge_ratio: float
    resolved: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    one_signed: bool
    u_min: float
    u_max: float
    radial_deviation: float
    linf: float
    tail_rate: float
    tail_kind: str
    tail_monotone: bool
    edge_ratio: float
    el_residual_linf: float

    @classmethod
    def csv_header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def csv_row(self) -> list[str]:
        out = []
        for v in asdict(self).values():
            if isinstance(v, bool):
                out.append(str(int(v)))
            elif isinstance(v, float):
                out.append(f"{v:.17g}")
            else:
                out.append(str(v))
        return out


def centroid(u: RealField) -> np.ndarray:
    """|u|-weighted circular mean position, one coordinate per axis."""
    grid = u.grid
    w = np.abs(u.values)
    total = w.sum()
    if total == 0:
        return np.zeros(grid.N)
    phase = np.exp(2j * np.pi * (grid.x + grid.L / 2) / grid.L)
    out = np.empty(grid.N)
    for axis in range(grid.N):
        other = tuple(a for a in range(grid.N) if a != axis)
        marginal = w.sum(axis=other) if other else w
        z = np.sum(marginal * phase)
        out[axis] = (np.angle(z) * grid.L / (2 * np.pi)) - grid.L / 2
    # wrap into [-L/2, L/2)
    return (out + grid.L / 2) % grid.L - grid.L / 2


def recenter(u: RealField) -> RealField:
    """Translate ``u`` so its centroid sits on the origin grid node."""
    c = centroid(u)
    if np.allclose(c, 0.0, atol=1e-14 * u.grid.L):
        return u
    return shift(u, -c)


def index_distance_sq(grid: Grid) -> np.ndarray:
    """Integer squared distance (in cells) of each node from the origin node."""
    j = np.arange(grid.n) - grid.n // 2
    parts = np.meshgrid(*([j] * grid.N), indexing="ij", sparse=True)
    return np.broadcast_to(sum(p * p for p in parts), grid.shape)


def sign_check(u: RealField, tol: float = SIGN_TOL) -> SignCheck:
    lo = float(u.values.min())
    hi = float(u.values.max())
    scale = max(abs(lo), abs(hi))
    return SignCheck(lo * hi >= -tol * scale * scale, lo, hi)


def symmetry_check(u: RealField) -> float:
    """Largest value spread among nodes equidistant from the centroid, over max|u|.

    The field is first translated (spectrally) so its centroid falls on a
    grid node; nodes are then grouped by exact squared index distance.
    """
    v = recenter(u).values.reshape(-1)
    scale = np.abs(v).max()
    if scale == 0:
        return 0.0
    d2 = index_distance_sq(u.grid).reshape(-1)
    order = np.argsort(d2, kind="stable")
    d_sorted = d2[order]
    v_sorted = v[order]
    starts = np.flatnonzero(np.r_[True, d_sorted[1:] != d_sorted[:-1]])
    spread = np.maximum.reduceat(v_sorted, starts) - np.minimum.reduceat(v_sorted, starts)
    return float(min(1.0, spread.max() / scale))


def _tail_bins(u: RealField):
    grid = u.grid
    v = np.abs(recenter(u).values).reshape(-1)
    r = np.sqrt(index_distance_sq(grid).reshape(-1)) * grid.dx
    width = grid.dx * math.sqrt(grid.N)
    lo, hi = 0.6 * grid.L / 2, 0.9 * grid.L / 2
    sel = (r >= lo) & (r <= hi)
    bins = np.floor((r[sel] - lo) / width).astype(int)
    nb = bins.max() + 1
    bmax = np.zeros(nb)
    np.maximum.at(bmax, bins, v[sel])
    centers = lo + (np.arange(nb) + 0.5) * width
    filled = np.zeros(nb, dtype=bool)
    filled[np.unique(bins)] = True
    return centers[filled], bmax[filled], float(v.max())


def decay_check(u: RealField, params: ModelParams) -> DecayReport:
    """Tail behaviour on the window 0.6 L/2 <= |x - x0| <= 0.9 L/2.

    Fits log|u| against r (m > 0) or against log r (m = 0) using
    distance-bin maxima.  ``monotone`` allows increases only below the
    round-off floor; ``edge_ratio`` is the last bin maximum over max|u|.
    """
    r, bmax, scale = _tail_bins(u)
    kind = "exponential" if params.m > 0 else "algebraic"
    floor = TAIL_FLOOR * scale
    monotone = bool(np.all(np.diff(bmax) <= floor))
    edge_ratio = float(bmax[-1] / scale) if scale > 0 else 0.0
    resolved = bool(scale > 0 and bmax.min() > floor)
    rate = math.nan
    if resolved and len(r) >= 2:
        xs = r if kind == "exponential" else np.log(r)
        rate = float(np.polyfit(xs, np.log(bmax), 1)[0])
    return DecayReport(rate, kind, monotone, edge_ratio, resolved)


def el_residual_field(u: RealField, params: ModelParams) -> RealField:
    """[(-Delta+m^2)^s - m^(2s)] u + mu u - |u|^(p-2) u."""
    v = u.values
    lin = apply_operator(u, params).values + params.mu * v
    return RealField(u.grid, lin - np.abs(v) ** (params.p - 2) * v)


def el_residual(u: RealField, params: ModelParams) -> float:
    """L^inf norm of the pointwise Euler-Lagrange residual."""
    return float(np.abs(el_residual_field(u, params).values).max())


def diagnose(u: RealField, params: ModelParams) -> DiagnosticsReport:
    sign = sign_check(u)
    decay = decay_check(u, params)
    return DiagnosticsReport(
        one_signed=sign.one_signed,
        u_min=sign.min,
        u_max=sign.max,
        radial_deviation=symmetry_check(u),
        linf=float(np.abs(u.values).max()),
        tail_rate=decay.tail_rate,
        tail_kind=decay.kind,
        tail_monotone=decay.monotone,
        edge_ratio=decay.edge_ratio,
        el_residual_linf=el_residual(u, params),
    )
