"""Manufactured-solution verification and cavity benchmark metrics."""

from .benchmark import REFERENCE, nusselt, velocity_maxima
from .cases import (
    CASES,
    CAVITY_LAMBDA,
    CAVITY_PR,
    CAVITY_RA,
    NS_LAMBDA,
    ManufacturedCase,
    cavity_problem,
    isothermal_ns_case,
    ns_divergence,
    poisson_linear_case,
    poisson_trig_case,
)
from .norms import ErrorNorms, convergence_order, error_norms
from .runner import (
    MESH_FAMILIES,
    CaseResult,
    ConvergenceReport,
    build_mesh,
    cavity_metrics,
    manufactured_errors,
    run_cavity,
    run_manufactured,
    run_study,
)

__all__ = [
    "CASES",
    "CAVITY_LAMBDA",
    "CAVITY_PR",
    "CAVITY_RA",
    "MESH_FAMILIES",
    "NS_LAMBDA",
    "REFERENCE",
    "CaseResult",
    "ConvergenceReport",
    "ErrorNorms",
    "ManufacturedCase",
    "build_mesh",
    "cavity_metrics",
    "cavity_problem",
    "convergence_order",
    "error_norms",
    "isothermal_ns_case",
    "manufactured_errors",
    "ns_divergence",
    "poisson_linear_case",
    "poisson_trig_case",
    "run_cavity",
    "run_manufactured",
    "run_study",
    "velocity_maxima",
]
