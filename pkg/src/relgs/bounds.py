"""Uniform-in-m bounds on the ground-state level c_m.

Upper bound: the level is at most the maximum of I_m along the ray through
w(x, y) = v0(x) / (1 + y), where v0 is the tent (1 on |x| <= 1, 2 - |x| on
1 <= |x| <= 2, 0 beyond).  With

    A = int_0^inf y^(1-2s) (1+y)^-2 dy = B(2-2s, 2s)
    B = int_0^inf y^(1-2s) (1+y)^-4 dy = B(2-2s, 2+2s)
    C = A [|grad v0|_2^2 + (mu/2)^(1/s) |v0|_2^2] + B |v0|_2^2

one gets, for m^2 <= (mu/2)^(1/s),

    c_m <= delta = (1/2 - 1/p) [C + mu |v0|_2^2]^(p/(p-2)) / (|v0|_p^p)^(2/(p-2)).

Lower bound: the embedding constant behind the analytic lower bound has no
closed form, so only an empirical on-solution constant is reported.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import integrate, special

from .energy import energy
from .spectral import ModelParams


class BoundsRangeError(ValueError):
    """m lies outside the range where the upper bound is established."""


@dataclass(frozen=True)
class BoundsReport:
    A: float
    B: float
    C: float
    delta: float
    tent_l2_sq: float
    tent_grad_l2_sq: float
    tent_lp_p: float
    m_max: float
    lower_witness: float = math.nan
    lower_constant: float = math.nan

    @classmethod
    def csv_header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def csv_row(self) -> list[str]:
        return [f"{v:.17g}" for v in asdict(self).values()]

    def as_text(self) -> str:
        width = max(len(k) for k in self.csv_header())
        return "\n".join(f"{k:<{width}} = {v:.17g}" for k, v in asdict(self).items())


def _sphere_area(N: int) -> float:
    return 2 * math.pi ** (N / 2) / math.gamma(N / 2)


def tent(r):
    """v0 as a function of |x|."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.clip(2.0 - r, 0.0, 1.0)


def tent_norms(N: int, p: float) -> tuple[float, float, float]:
    """(|v0|_2^2, |grad v0|_2^2, |v0|_p^p) in R^N."""
    if N < 1:
        raise ValueError("N >= 1 required")
    if N == 1:
        return 8.0 / 3.0, 2.0, 2.0 + 2.0 / (p + 1)
    area = _sphere_area(N)

    def radial(q):
        inner = 1.0 / N
        outer, _ = integrate.quad(
            lambda r: (2.0 - r) ** q * r ** (N - 1), 1.0, 2.0, epsabs=0, epsrel=1e-13
        )
        return area * (inner + outer)

    grad = area * (2.0**N - 1.0) / N
    return radial(2.0), grad, radial(p)


def weight_integrals(s: float) -> tuple[float, float]:
    """(A, B) from the Beta function."""
    if not 0 < s < 1:
        raise ValueError(f"s in (0,1) required, got {s}")
    return float(special.beta(2 - 2 * s, 2 * s)), float(special.beta(2 - 2 * s, 2 + 2 * s))


def weight_integrals_quad(s: float) -> tuple[float, float]:
    """(A, B) by adaptive quadrature, split at y = 1 (endpoint singularity, slow tail)."""

    def integral(power):
        f = lambda y: y ** (1 - 2 * s) * (1 + y) ** (-power)  # noqa: E731
        a, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
        b, _ = integrate.quad(f, 1, math.inf, epsabs=0, epsrel=1e-13, limit=200)
        return a + b

    return integral(2), integral(4)


def admissible_m_max(params: ModelParams) -> float:
    """(mu/2)^(1/(2s))."""
    return (params.mu / 2) ** (1 / (2 * params.s))


def upper_bound_delta(params: ModelParams) -> BoundsReport:
    m_max = admissible_m_max(params)
    if params.m > m_max * (1 + 1e-12):
        raise BoundsRangeError(
            f"upper bound holds for 0 <= m <= (mu/2)^(1/2s) = {m_max:.6g}, got m={params.m}"
        )
    A, B = weight_integrals(params.s)
    l2, grad, lp = tent_norms(params.N, params.p)
    p = params.p
    C = A * (grad + (params.mu / 2) ** (1 / params.s) * l2) + B * l2
    delta = (0.5 - 1 / p) * (C + params.mu * l2) ** (p / (p - 2)) / lp ** (2 / (p - 2))
    return BoundsReport(
        A=A, B=B, C=C, delta=delta, tent_l2_sq=l2, tent_grad_l2_sq=grad, tent_lp_p=lp,
        m_max=m_max,
    )


def lower_bound_witness(result, params: ModelParams, tol: float = 1e-8) -> float:
    """Empirical constant C' = ||u||_e^2 / |u|_p^2 on a converged ground state.

    Also checks c_m >= (1/2 - 1/p) C'^(p/(p-2)), which on the Nehari
    manifold holds with equality.
    """
    if not result.converged:
        raise ValueError("lower_bound_witness needs a converged result")
    e = energy(result.field, params)
    p = params.p
    lp_p = e.lp_p
    c_emp = e.norm_e_sq / lp_p ** (2 / p)
    floor = (0.5 - 1 / p) * c_emp ** (p / (p - 2))
    if result.c_m < floor * (1 - tol):
        raise AssertionError(
            f"lower-bound chain violated: c_m={result.c_m:.12g} < {floor:.12g}"
        )
    return c_emp


def with_lower_witness(report: BoundsReport, result, params: ModelParams) -> BoundsReport:
    """Copy of ``report`` carrying (1/2 - 1/p)|u_m|_p^p and the empirical C'."""
    c_emp = lower_bound_witness(result, params)
    lw = (0.5 - 1 / params.p) * energy(result.field, params).lp_p
    fields_ = asdict(report)
    fields_.update(lower_witness=lw, lower_constant=c_emp)
    return BoundsReport(**fields_)
