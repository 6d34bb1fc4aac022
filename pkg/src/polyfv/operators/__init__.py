"""Discrete differential operators of the hybrid finite volume scheme."""

from .clusters import ClusterPartition, build_clusters
from .diffusion import DiffusionOperator, assemble_diffusion, discrete_laplacian_apply
from .flow import (
    TRANSPORT_MODES,
    FlowOperators,
    build_flow_operators,
    cell_divergence,
    mass_flux,
    pressure_gradient,
    transport_centered,
    transport_upwind,
)
from .gradient import (
    GradientOperators,
    build_gradients,
    cell_gradient,
    cell_gradients,
    cone_gradient,
    cone_gradients,
    face_residual,
    face_value_matrix,
)

__all__ = [
    "TRANSPORT_MODES",
    "ClusterPartition",
    "DiffusionOperator",
    "FlowOperators",
    "GradientOperators",
    "assemble_diffusion",
    "build_clusters",
    "build_flow_operators",
    "build_gradients",
    "cell_divergence",
    "cell_gradient",
    "cell_gradients",
    "cone_gradient",
    "cone_gradients",
    "discrete_laplacian_apply",
    "face_residual",
    "face_value_matrix",
    "mass_flux",
    "pressure_gradient",
    "transport_centered",
    "transport_upwind",
]
