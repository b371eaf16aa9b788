"""Per-Fourier-mode checks of the extension (Dirichlet-to-Neumann) picture.

Writing the extension of u as a sum of x-Fourier modes, each mode with
rho = sqrt(|k|^2 + m^2) solves the ODE

    -(y^a V')' + rho^2 y^a V = 0,   V(0) = 1,   V(inf) = 0,   a = 1 - 2s,

whose decaying solution is V(y) = theta_s(rho y) with

    theta_s(r) = 2^(1-s) / Gamma(s) * r^s K_s(r).

Using d/dr [r^s K_s(r)] = -r^s K_{s-1}(r) = -r^s K_{1-s}(r), the conormal
derivative -y^a V'(y) tends to kappa_s rho^(2s) as y -> 0, and the weighted
Dirichlet energy of the mode equals the same number.  Summed over modes
this is the trace identity ||v||^2 = kappa_s |u|^2_{H^s_m}.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from .bessel import bessel_k


class ExtrapolationError(ArithmeticError):
    """Richardson estimates failed to settle."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""


@dataclass(frozen=True, eq=False)
class ExtensionProfile:
    """Samples of a single-mode extension profile on ``y_grid`` (y_grid[0] = 0)."""

    s: float
    rho: float
    y_grid: np.ndarray
    values: np.ndarray


def kappa_s(s: float) -> float:
    """Trace constant 2^(1-2s) Gamma(1-s) / Gamma(s)."""
    if not 0 < s < 1:
        raise ValueError(f"s in (0,1) required, got {s}")
    return 2.0 ** (1 - 2 * s) * math.gamma(1 - s) / math.gamma(s)


def _theta_prefactor(s: float) -> float:
    return 2.0 ** (1 - s) / math.gamma(s)


def profile_theta(s: float, r):
    """theta_s(r) = 2^(1-s)/Gamma(s) r^s K_s(r), with theta_s(0) = 1."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("profile_theta requires r >= 0")
    out = np.ones_like(r_arr)
    pos = r_arr > 0
    if np.any(pos):
        rp = r_arr[pos]
        out[pos] = _theta_prefactor(s) * rp**s * bessel_k(s, rp)
    return out if out.ndim else float(out)


def profile_theta_derivative(s: float, r):
    """d theta_s / dr = -2^(1-s)/Gamma(s) r^s K_{1-s}(r), for r > 0."""
    r = np.asarray(r, dtype=float)
    out = -_theta_prefactor(s) * r**s * bessel_k(1 - s, r)
    return out if np.ndim(out) else float(out)


def _conormal(s: float, rho: float, y: float) -> float:
    """-y^(1-2s) d/dy theta_s(rho y)."""
    return -(y ** (1 - 2 * s)) * rho * profile_theta_derivative(s, rho * y)


def dn_limit(s: float, rho: float, depth: int = 4, ratio: float = 2.0, y0=None):
    """Richardson-extrapolated -lim_{y->0} y^(1-2s) d/dy theta_s(rho y).

    The conormal derivative expands in powers y^(2-2s), y^2, y^(4-2s), y^4,
    ... ; each extrapolation column removes the next one.  Returns the
    extrapolated value and the full tableau.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if y0 is None:
        y0 = 0.05 / rho
    exponents = []
    j = 1
    while len(exponents) < depth:
        exponents.extend([2 * j - 2 * s, 2.0 * j])
        j += 1
    exponents = exponents[:depth]
    ys = [y0 / ratio**i for i in range(depth + 1)]
    table = [[_conormal(s, rho, y) for y in ys]]
    for col, e in enumerate(exponents):
        prev = table[-1]
        f = ratio**e
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
    return table[-1][0], table


def dn_map_check(s: float, rho: float, depth: int = 4, ratio: float = 2.0) -> float:
    """Relative error of the extrapolated conormal derivative against kappa_s rho^(2s).

    Raises :class:`ExtrapolationError` if the last two extrapolation levels
    disagree by more than they improve on the raw samples (oscillation).
    """
    value, table = dn_limit(s, rho, depth=depth, ratio=ratio)
    target = kappa_s(s) * rho ** (2 * s)
    raw_spread = abs(table[0][-1] - table[0][-2])
    last_change = abs(table[-1][0] - table[-2][-1])
    if not np.isfinite(value) or last_change > max(raw_spread, 1e-14 * abs(target)):
        raise ExtrapolationError(
            f"Richardson extrapolation did not settle for s={s}, rho={rho}"
        )
    return abs(value - target) / target


def _quad(func, a, b, epsrel):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, limit=400, epsabs=0.0, epsrel=epsrel)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return val


def extension_energy_per_mode(
    s: float, rho: float, amplitude_sq: float = 1.0, epsrel: float = 1e-11
) -> float:
    """int_0^inf y^(1-2s) (V'(y)^2 + rho^2 V(y)^2) dy for V = amplitude * theta_s(rho y)."""
    if not rho > 0:
        raise ValueError("rho must be positive")

    def integrand(y):
        r = rho * y
        dv = rho * profile_theta_derivative(s, r)
        v = profile_theta(s, r)
        return y ** (1 - 2 * s) * (dv * dv + rho * rho * v * v)

    # beyond y = 40/rho the integrand is below e^-80 of its scale
    knots = [0.0, 1.0 / rho, 5.0 / rho, 40.0 / rho]
    total = sum(_quad(integrand, a, b, epsrel) for a, b in zip(knots[:-1], knots[1:]))
    return amplitude_sq * total


def graded_mesh(y_max: float, n_y: int, gamma: float = 3.0) -> np.ndarray:
    return y_max * (np.arange(n_y + 1) / n_y) ** gamma


def extension_ode_solve(
    s: float, rho: float, y_max: float, n_y: int, gamma: float = 3.0
) -> ExtensionProfile:
    """Finite-difference solution of -(y^a V')' + rho^2 y^a V = 0 on [0, y_max].

    Boundary values V(0) = 1, V(y_max) = 0; conservative three-point scheme
    on the graded mesh y_j = y_max (j/n_y)^gamma, with y^a averaged exactly
    over each cell and over each dual cell.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if y_max * rho < 20:
        raise ValueError("need y_max * rho >= 20 so the truncated tail is negligible")
    if n_y < 200:
        raise ValueError("need n_y >= 200")
    a = 1 - 2 * s
    y = graded_mesh(y_max, n_y, gamma)
    h = np.diff(y)
    # flux weights: mean of y^a over each cell
    w_cell = (y[1:] ** (a + 1) - y[:-1] ** (a + 1)) / ((a + 1) * h)
    # mass weights: int of y^a over the dual cell [y_{j-1/2}, y_{j+1/2}]
    mid = 0.5 * (y[1:] + y[:-1])
    w_dual = (mid[1:] ** (a + 1) - mid[:-1] ** (a + 1)) / (a + 1)

    m = n_y - 1  # interior unknowns y_1 .. y_{n_y-1}
    flux_l = w_cell[:-1] / h[:-1]
    flux_r = w_cell[1:] / h[1:]
    diag = flux_l + flux_r + rho * rho * w_dual
    ab = np.zeros((3, m))
    ab[0, 1:] = -flux_r[:-1]
    ab[1] = diag
    ab[2, :-1] = -flux_l[1:]
    rhs = np.zeros(m)
    rhs[0] = flux_l[0] * 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            interior = solve_banded((1, 1), ab, rhs)
        except (np.linalg.LinAlgError, RuntimeWarning) as exc:
            raise np.linalg.LinAlgError(f"singular extension system: {exc}") from exc
    values = np.concatenate([[1.0], interior, [0.0]])
    return ExtensionProfile(s=s, rho=rho, y_grid=y, values=values)
