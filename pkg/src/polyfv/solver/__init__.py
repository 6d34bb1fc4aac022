"""Assembly and Newton solution of the coupled discrete system."""

from .energy import EnergyReport, energy_identities
from .linear import DIRECT_LIMIT, LinearSolveError, LinearStats, linear_solve
from .newton import (
    ConvergenceError,
    IterationRecord,
    NewtonOptions,
    SolverState,
    conduction_guess,
    continuation_in_Ra,
    default_ladder,
    newton_solve,
)
from .system import CoupledSystem, FieldSet, Layout, Problem, SolverError

__all__ = [
    "DIRECT_LIMIT",
    "ConvergenceError",
    "CoupledSystem",
    "EnergyReport",
    "FieldSet",
    "IterationRecord",
    "Layout",
    "LinearSolveError",
    "LinearStats",
    "NewtonOptions",
    "Problem",
    "SolverError",
    "SolverState",
    "conduction_guess",
    "continuation_in_Ra",
    "default_ladder",
    "energy_identities",
    "linear_solve",
    "newton_solve",
]
