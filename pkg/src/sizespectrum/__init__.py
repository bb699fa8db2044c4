"""Deterministic simulator and analysis toolkit for a biomass-conserving
jump-growth size-spectrum model of aquatic ecosystems."""

__version__ = "0.1.0"

from .diagnostics import (
    biomass_drift,
    blowup_envelope_check,
    build_run_report,
    detect_gaps,
    match_gaps,
    max_support,
    moment_series,
    predicted_support,
    steady_state_residual,
)
from .grid import (
    Distribution,
    Grid,
    interpolate,
    linear_initial_condition,
    make_uniform_grid,
    trapezoid_moment,
)
from .integrator import StepControl, Trajectory, integrate, integrate_ode, step_embedded
from .kernel import (
    COMPACT,
    DIRAC,
    GAUSSIAN,
    ModelParams,
    RegimeError,
    UnsupportedPreference,
    blowup_constant,
    find_m_star,
    find_m_tilde,
    kernel_value,
    moment_bracket,
    offspring_multiplicity,
    power_law_exponent,
    powerlaw_residual,
    preference_support,
    preference_value,
)
from .operator import (
    QComponents,
    apply_Q,
    boundary_biomass_flux,
    discrete_moment_rate,
    weak_form_rhs,
)
from .reference import DiracModel, dirac_rhs, moment_rate_ratio_form, refined_reference

__all__ = [
    "COMPACT",
    "DIRAC",
    "GAUSSIAN",
    "Distribution",
    "DiracModel",
    "Grid",
    "ModelParams",
    "QComponents",
    "RegimeError",
    "StepControl",
    "Trajectory",
    "UnsupportedPreference",
    "apply_Q",
    "biomass_drift",
    "blowup_constant",
    "blowup_envelope_check",
    "boundary_biomass_flux",
    "build_run_report",
    "detect_gaps",
    "dirac_rhs",
    "discrete_moment_rate",
    "find_m_star",
    "find_m_tilde",
    "integrate",
    "integrate_ode",
    "interpolate",
    "kernel_value",
    "linear_initial_condition",
    "make_uniform_grid",
    "match_gaps",
    "max_support",
    "moment_bracket",
    "moment_rate_ratio_form",
    "moment_series",
    "offspring_multiplicity",
    "power_law_exponent",
    "powerlaw_residual",
    "predicted_support",
    "preference_support",
    "preference_value",
    "refined_reference",
    "steady_state_residual",
    "step_embedded",
    "trapezoid_moment",
    "weak_form_rhs",
]
