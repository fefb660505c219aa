"""Linear stability of phototactic algal suspensions heated or cooled from below.

The package computes the motionless equilibrium of an algal suspension
under collimated top illumination and a bottom-top temperature
difference, assembles the linearized perturbation eigenproblem, traces
neutral stability curves in the (wavenumber, bioconvective Rayleigh
number) plane, locates critical onsets including oscillatory (Hopf)
ones, and renders eigenmode flow patterns.
"""
from .basic_state import (
    BasicState,
    basic_state_residual,
    gamma_coefficients,
    solve_basic_state,
    write_profiles_csv,
)
from .model import (
    ModelParams,
    beta_for_critical_intensity,
    critical_intensity,
    params_for_critical_intensity,
    taxis,
    taxis_derivatives,
    xi,
    xi_star,
)
from .neutral import (
    CriticalResult,
    NeutralCurve,
    NeutralPoint,
    classify_bifurcation,
    critical_to_json,
    find_critical,
    mass_branch_limit,
    neutral_rayleigh,
    oscillation_period,
    trace_neutral_curve,
    write_curve_csv,
)
from .patterns import (
    FieldSnapshot,
    mode_to_fields,
    oscillation_snapshots,
    time_series,
    with_total_temperature,
    write_fields_csv,
)
from .stability import (
    EigenMode,
    StabilityOperators,
    assemble_operators,
    boundary_residuals,
    eigenmode,
    eigenpair_residual,
    growth_rate,
    growth_rate_fast,
    leading_eigenvalues,
    write_spectrum_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BasicState",
    "CriticalResult",
    "EigenMode",
    "FieldSnapshot",
    "ModelParams",
    "NeutralCurve",
    "NeutralPoint",
    "StabilityOperators",
    "assemble_operators",
    "basic_state_residual",
    "beta_for_critical_intensity",
    "boundary_residuals",
    "classify_bifurcation",
    "critical_intensity",
    "critical_to_json",
    "eigenmode",
    "eigenpair_residual",
    "find_critical",
    "gamma_coefficients",
    "growth_rate",
    "growth_rate_fast",
    "leading_eigenvalues",
    "mass_branch_limit",
    "mode_to_fields",
    "neutral_rayleigh",
    "oscillation_period",
    "oscillation_snapshots",
    "params_for_critical_intensity",
    "solve_basic_state",
    "taxis",
    "taxis_derivatives",
    "time_series",
    "trace_neutral_curve",
    "with_total_temperature",
    "write_curve_csv",
    "write_fields_csv",
    "write_profiles_csv",
    "write_spectrum_csv",
    "xi",
    "xi_star",
]
