"""Ground states of the pseudo-relativistic equation

    [(-Delta + m^2)^s - m^(2s)] u + mu u = |u|^(p-2) u   in R^N,

computed on a periodic pseudospectral grid, with checks of the extension
identities, the Bessel-kernel representation and the uniform-in-m bounds.
"""

from .bessel import KernelParams, apply_operator_quadrature, bessel_k, kernel_constant, kernel_value
from .bounds import BoundsReport, lower_bound_witness, tent_norms, upper_bound_delta, weight_integrals
from .diagnostics import (
    DiagnosticsReport,
    decay_check,
    diagnose,
    el_residual,
    sign_check,
    symmetry_check,
)
from .energy import (
    EnergyBreakdown,
    NehariError,
    energy,
    ground_energy,
    nehari_project,
    norm_equivalence_constants,
)
from .extension import (
    dn_map_check,
    extension_energy_per_mode,
    extension_ode_solve,
    kappa_s,
    profile_theta,
)
from .fieldio import read_field, write_field
from .solver import (
    GroundStateResult,
    SolverConfig,
    continuation_m,
    gradient,
    rearrange_decreasing,
    solve_ground_state,
)
from .spectral import (
    Grid,
    ModelParams,
    RealField,
    SpectralField,
    apply_operator,
    forward_transform,
    hs_norm_sq,
    inverse_transform,
    lp_norm,
    symbol,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport",
    "DiagnosticsReport",
    "EnergyBreakdown",
    "Grid",
    "GroundStateResult",
    "KernelParams",
    "ModelParams",
    "NehariError",
    "RealField",
    "SolverConfig",
    "SpectralField",
    "apply_operator",
    "apply_operator_quadrature",
    "bessel_k",
    "continuation_m",
    "decay_check",
    "diagnose",
    "dn_map_check",
    "el_residual",
    "energy",
    "extension_energy_per_mode",
    "extension_ode_solve",
    "forward_transform",
    "gradient",
    "ground_energy",
    "hs_norm_sq",
    "inverse_transform",
    "kappa_s",
    "kernel_constant",
    "kernel_value",
    "lower_bound_witness",
    "lp_norm",
    "nehari_project",
    "norm_equivalence_constants",
    "profile_theta",
    "read_field",
    "rearrange_decreasing",
    "sign_check",
    "solve_ground_state",
    "symbol",
    "symmetry_check",
    "tent_norms",
    "upper_bound_delta",
    "weight_integrals",
    "write_field",
]
