"""Polyhedral meshes, generators for the test families, and export."""

from .cone import build_truncated_cone, frustum_volume
from .core import PLANARITY_TOL, Cell, Cone, Face, Mesh, MeshError, QualityReport, validate
from .generators import (
    RNG_NAME,
    build_gauss_lobatto_box,
    build_random_perturbed,
    build_rectilinear,
    build_smooth_mapped,
    build_uniform_box,
    gauss_lobatto_abscissae,
    split_nonplanar_faces,
)
from .io import mesh_summary, write_mesh_sidecar, write_vtk

__all__ = [
    "PLANARITY_TOL",
    "RNG_NAME",
    "Cell",
    "Cone",
    "Face",
    "Mesh",
    "MeshError",
    "QualityReport",
    "build_gauss_lobatto_box",
    "build_random_perturbed",
    "build_rectilinear",
    "build_smooth_mapped",
    "build_truncated_cone",
    "build_uniform_box",
    "frustum_volume",
    "gauss_lobatto_abscissae",
    "mesh_summary",
    "split_nonplanar_faces",
    "validate",
    "write_mesh_sidecar",
    "write_vtk",
]
