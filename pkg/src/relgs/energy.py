"""Energy functional, Nehari functional and Nehari projection (trace side).

All quantities use the trace-side identity ||v||^2 = kappa_s |u|^2_{H^s_m}
with kappa_s taken as 1, so for a trace u:

    I(u) = 1/2 |u|^2_{H^s_m} - m^(2s)/2 |u|_2^2 + mu/2 |u|_2^2 - 1/p |u|_p^p
    ||u||_e^2 = |u|^2_{H^s_m} + (mu - m^(2s)) |u|_2^2
    J(u) = ||u||_e^2 - |u|_p^p
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .spectral import ModelParams, RealField, hs_norm_sq, lp_power, operator_form

NEHARI_TOL = 1e-8


class NehariError(ValueError):
    """A field cannot be placed on, or is not on, the Nehari manifold."""


@dataclass(frozen=True)
class EnergyBreakdown:
    hs_term: float
    mass_shift: float
    potential: float
    nonlinear: float
    total: float
    norm_e_sq: float
    nehari: float

    @property
    def lp_p(self) -> float:
        """|u|_p^p, recovered from the nonlinear term."""
        return self.norm_e_sq - self.nehari

    @classmethod
    def csv_header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def csv_row(self) -> list[str]:
        return [f"{v:.17g}" for v in asdict(self).values()]


def _parts(u: RealField, params: ModelParams) -> tuple[float, float, float]:
    """(<A u, u>, |u|_2^2, |u|_p^p) with A the shifted operator."""
    form = operator_form(u, params)
    l2 = lp_power(u, 2)
    lp = lp_power(u, params.p)
    return form, l2, lp


def energy(u: RealField, params: ModelParams) -> EnergyBreakdown:
    form, l2, lp = _parts(u, params)
    shift = params.mass_shift
    hs = form + shift * l2
    hs_term = 0.5 * hs
    mass_shift = -0.5 * shift * l2
    potential = 0.5 * params.mu * l2
    nonlinear = -lp / params.p
    # form + mu*l2 avoids the cancellation in hs - m^(2s) l2
    norm_e_sq = form + params.mu * l2
    return EnergyBreakdown(
        hs_term=hs_term,
        mass_shift=mass_shift,
        potential=potential,
        nonlinear=nonlinear,
        total=hs_term + mass_shift + potential + nonlinear,
        norm_e_sq=norm_e_sq,
        nehari=norm_e_sq - lp,
    )


def norm_e_sq(u: RealField, params: ModelParams) -> float:
    form, l2, _ = _parts(u, params)
    return form + params.mu * l2


def projection_factor(norm_e2: float, lp_p: float, p: float) -> float:
    """t* with J(t* u) = 0, i.e. (||u||_e^2 / |u|_p^p)^(1/(p-2))."""
    if not (norm_e2 > 0 and lp_p > 0):
        raise NehariError(
            "Nehari projection undefined for a field with zero energy norm or L^p norm"
        )
    return (norm_e2 / lp_p) ** (1.0 / (p - 2))


def nehari_project(u: RealField, params: ModelParams) -> tuple[float, RealField]:
    """Scale ``u`` onto the Nehari manifold; returns (t*, t* u)."""
    form, l2, lp = _parts(u, params)
    t = projection_factor(form + params.mu * l2, lp, params.p)
    return t, t * u


def ground_energy(u: RealField, params: ModelParams, tol: float = NEHARI_TOL) -> float:
    """c = (1/2 - 1/p) |u|_p^p = (1/2 - 1/p) ||u||_e^2 for u on the Nehari manifold.

    Raises :class:`NehariError` if |J(u)| exceeds ``tol * ||u||_e^2``, or if
    the two expressions disagree by more than ``tol`` relative.
    """
    form, l2, lp = _parts(u, params)
    ne = form + params.mu * l2
    if not abs(ne - lp) <= tol * ne:
        raise NehariError(
            f"field is not on the Nehari manifold: |J|/||u||_e^2 = {abs(ne - lp) / ne:.3e}"
        )
    factor = 0.5 - 1.0 / params.p
    return factor * 0.5 * (ne + lp)


def norm_equivalence_constants(params: ModelParams) -> tuple[float, float]:
    """(C1, C2) with C1 |u|^2_{H^s_m} <= ||u||_e^2 <= C2 |u|^2_{H^s_m}."""
    if params.m == 0:
        raise ValueError(
            "norm equivalence constants degenerate at m = 0 "
            "(||.||_e is the H^s seminorm plus mu L^2 there)"
        )
    ratio = params.mu / params.mass_shift
    return min(1.0, ratio), max(1.0, ratio)


def max_ray_energy(norm_e2: float, lp_p: float, p: float) -> float:
    """max_{t>0} I(t u) = (1/2 - 1/p) (||u||_e^2)^(p/(p-2)) / (|u|_p^p)^(2/(p-2))."""
    return (0.5 - 1.0 / p) * norm_e2 ** (p / (p - 2)) / lp_p ** (2.0 / (p - 2))


def hs_sandwich(u: RealField, params: ModelParams) -> tuple[float, float, float]:
    """(C1 |u|^2_{H^s_m}, ||u||_e^2, C2 |u|^2_{H^s_m}) for quick checks."""
    c1, c2 = norm_equivalence_constants(params)
    hs = hs_norm_sq(u, params)
    return c1 * hs, norm_e_sq(u, params), c2 * hs


__all__ = [
    "EnergyBreakdown",
    "NehariError",
    "energy",
    "ground_energy",
    "hs_sandwich",
    "max_ray_energy",
    "nehari_project",
    "norm_e_sq",
    "norm_equivalence_constants",
    "projection_factor",
]
