"""Closed-form CHOKe models: steady state, spatial profile, transient regime."""

from .export import profile_to_csv, transient_to_csv
from .spatial import (
    RHO0_CRITICAL,
    DerivedCoefficients,
    ProfileDerivatives,
    SpatialProfile,
    SpatialSample,
    build_profile,
    critical_point,
    critical_rate,
    derive_coefficients,
    profile_derivatives,
    rho0_of_tau,
    y_of_rho0,
)
from .steady import (
    MU0_LIMIT,
    SteadyInput,
    SteadyStatePoint,
    loss_model_residual,
    solve_steady_state,
    steady_consistency_residual,
    sweep,
)
from .transient import extreme_utilization, transient_curve, transient_utilization

__all__ = [
    "MU0_LIMIT",
    "RHO0_CRITICAL",
    "DerivedCoefficients",
    "ProfileDerivatives",
    "SpatialProfile",
    "SpatialSample",
    "SteadyInput",
    "SteadyStatePoint",
    "build_profile",
    "critical_point",
    "critical_rate",
    "derive_coefficients",
    "extreme_utilization",
    "loss_model_residual",
    "profile_derivatives",
    "profile_to_csv",
    "rho0_of_tau",
    "solve_steady_state",
    "steady_consistency_residual",
    "sweep",
    "transient_curve",
    "transient_to_csv",
    "transient_utilization",
    "y_of_rho0",
]
