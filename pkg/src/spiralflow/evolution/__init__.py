"""Time-dependent problems on the half-line and on annuli."""

from .annulus import RotatingWaveResult, annulus_grid, annulus_initial_data, evolve_annulus
from .checks import (
    CauchyRun,
    DiscreteReference,
    cauchy_grid,
    cauchy_state,
    check_comparison,
    check_gradient_ordering,
    check_long_time_convergence,
    curvature_equation_residual,
    curvature_refinement_study,
    evolving_curvature_residual,
    run_cauchy,
    scheme_margin,
    steady_curvature_residual,
    steady_drift,
)
from .initial import InitialData
from .scheme import BCKind, Boundary, EvolutionState, RadialOperator
from .solver import RunStats, discrete_steady_state, evolve, rosenbrock_step, step

__all__ = [
    "BCKind", "Boundary", "CauchyRun", "DiscreteReference", "EvolutionState", "InitialData",
    "RadialOperator", "RotatingWaveResult", "RunStats", "annulus_grid", "annulus_initial_data",
    "cauchy_grid", "cauchy_state", "check_comparison", "check_gradient_ordering",
    "check_long_time_convergence", "curvature_equation_residual", "curvature_refinement_study",
    "discrete_steady_state", "evolve", "evolve_annulus", "evolving_curvature_residual",
    "rosenbrock_step", "run_cauchy", "scheme_margin", "steady_curvature_residual",
    "steady_drift", "step",
]
