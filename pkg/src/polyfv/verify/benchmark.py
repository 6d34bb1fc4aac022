"""Cavity benchmark metrics: wall Nusselt numbers and velocity maxima."""

from __future__ import annotations

import numpy as np

from ..solver.newton import SolverState

# reference N=20 and N=30 values on the cubic Gauss-Lobatto grid, Ra = 1e7, Pr = 0.71
REFERENCE = {
    20: {"Nu": 16.380, "u1_max": 333.23, "u2_max": 70.959, "u3_max": 767.01},
    30: {"u1_max": 371.89, "u2_max": 79.105, "u3_max": 761.11},
}


def nusselt(state: SolverState, wall: str = "xmin") -> float:
    """Average wall heat flux from the scheme's own boundary fluxes ``F_{K,sigma}(T)``.

    The sign is chosen so that heat entering at the hot wall ``xmin`` and
    leaving at the cold wall ``xmax`` are both positive (conduction gives 1
    for a unit temperature difference on the unit cube).
    """
    sysm = state.system
    m = sysm.mesh
    bf = m.boundary_faces
    on_wall = m.face_tags[bf] == wall
    if not on_wall.any():
        raise ValueError(f"no boundary faces tagged {wall!r}")
    if not np.all(sysm.diffusion.dirichlet[on_wall]):
        raise ValueError(f"wall {wall!r} is not isothermal (Gamma_1)")
    fs = state.fields
    F = sysm.diffusion.boundary_fluxes(np.concatenate([fs.T, fs.T_boundary]))[on_wall]
    faces = bf[on_wall]
    area = m.face_area[faces].sum()
    return float(np.sum(F * m.face_normal[faces, 0]) / area)


def velocity_maxima(state: SolverState) -> tuple:
    """``max_K |u_K^(i)|`` for each component."""
    u = state.fields.u
    return tuple(float(v) for v in np.abs(u).max(axis=0))
