"""Finite-volume solver and verification suite for fast-reaction limits of
reaction-diffusion systems with porous-medium-type diffusion."""

from .errors import ConfigError, DomainError, InvalidParameter, StepFailure
from .laws import (
    DiffusionLaw,
    LimitFlux,
    custom_law,
    eval_limit_flux,
    eval_phi,
    eval_phi_deriv,
    invert_phi,
    linear_oracle_law,
    power_law,
    regularize,
)
from .problem import (
    DtControl,
    Field,
    Grid1D,
    ProblemSpec,
    SolverTolerances,
    Trajectory,
    build_initial_data,
    make_grid,
    truncate_initial_data,
)
from .stepper import BoundaryCondition, StepReport, adaptive_advance, implicit_step
from .system import IterationTrace, coupled_step, solve_system, weak_residual
from .limit import (
    FrontFit,
    LimitSpec,
    extract_front,
    l1_contraction_check,
    limit_spec_from,
    positive_negative_parts,
    self_similar_collapse,
    solve_limit,
)
from .diagnostics import DiagnosticsReport, compare_to_limit, comparison_test, measure

__version__ = "0.1.0"
