"""Cell gradient, normal-flux residual and stabilized cone gradient.

All operators act on the scalar unknown vector ``[u_K (cells), u_sigma
(boundary faces)]``; interior face values come from the barycentric map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..spaces import BarycentricMap, DiscreteField


def face_value_matrix(bary: BarycentricMap) -> sp.csr_matrix:
    """(n_faces, n_cells + n_boundary) map from unknowns to face values."""
    m = bary.mesh
    nb = len(m.boundary_faces)
    P = sp.csr_matrix(
        (np.ones(nb), (m.boundary_faces, np.arange(nb))), shape=(m.n_faces, nb)
    )
    return sp.hstack([bary.matrix, P], format="csr")


def _cell_rows(m, n_unknowns) -> sp.csr_matrix:
    """(n_cones, n_unknowns) selector of the cone's own cell value."""
    return sp.csr_matrix(
        (np.ones(m.n_cones), (np.arange(m.n_cones), m.cone_cell)), shape=(m.n_cones, n_unknowns)
    )


@dataclass(frozen=True)
class GradientOperators:
    """Sparse matrices of the discrete gradients on a given mesh.

    ``cell[i]`` maps unknowns to the i-th component of ``grad_K u`` (one row per
    cell), ``residual`` to ``R_{K,sigma} u`` and ``cone[i]`` to the i-th component
    of ``grad_{K,sigma} u`` (one row per cone).
    """

    bary: BarycentricMap
    cell: tuple
    residual: sp.csr_matrix
    cone: tuple

    @property
    def n_unknowns(self) -> int:
        return self.residual.shape[1]


def build_gradients(bary: BarycentricMap) -> GradientOperators:
    m = bary.mesh
    d = m.dim
    nu = m.n_cells + len(m.boundary_faces)
    Fv = face_value_matrix(bary)
    own = _cell_rows(m, nu)
    jump = Fv[m.cone_face] - own  # u_sigma - u_K per cone
    scale = m.cone_area / m.cell_volume[m.cone_cell]
    to_cell = sp.csr_matrix(
        (np.ones(m.n_cones), (m.cone_cell, np.arange(m.n_cones))), shape=(m.n_cells, m.n_cones)
    )
    cell = tuple(
        (to_cell @ sp.diags(scale * m.cone_normal[:, i]) @ jump).tocsr() for i in range(d)
    )
    rel = m.face_center[m.cone_face] - m.cell_center[m.cone_cell]
    cell_at_cone = [G[m.cone_cell] for G in cell]
    proj = sum(sp.diags(rel[:, i]) @ cell_at_cone[i] for i in range(d))
    residual = (sp.diags(np.sqrt(d) / m.cone_dist) @ (jump - proj)).tocsr()
    cone = tuple(
        (cell_at_cone[i] + sp.diags(m.cone_normal[:, i]) @ residual).tocsr() for i in range(d)
    )
    return GradientOperators(bary, cell, residual, cone)


def cell_gradient(field: DiscreteField, K: int) -> np.ndarray:
    """``grad_K u = (1/m_K) sum_sigma m_sigma (u_sigma - u_K) n_{K,sigma}``."""
    m = field.mesh
    fv = field.face_values()
    sl = m.cell_cones(K)
    faces = m.cone_face[sl]
    w = m.cone_area[sl] * (fv[faces] - field.cells[K])
    return (w[:, None] * m.cone_normal[sl]).sum(axis=0) / m.cell_volume[K]


def _cone_index(m, K, f):
    sl = m.cell_cones(K)
    hit = np.nonzero(m.cone_face[sl] == f)[0]
    if len(hit) == 0:
        raise ValueError(f"face {f} does not bound cell {K}")
    return sl.start + int(hit[0])


def face_residual(field: DiscreteField, K: int, f: int) -> float:
    """``R_{K,sigma} u = sqrt(d)/d_{K,sigma} (u_sigma - u_K - grad_K u . (x_sigma - x_K))``."""
    m = field.mesh
    c = _cone_index(m, K, f)
    us = field.face_values()[f]
    g = cell_gradient(field, K)
    r = us - field.cells[K] - g @ (m.face_center[f] - m.cell_center[K])
    return float(np.sqrt(m.dim) / m.cone_dist[c] * r)


def cone_gradient(field: DiscreteField, K: int, f: int) -> np.ndarray:
    """``grad_{K,sigma} u = grad_K u + R_{K,sigma} u n_{K,sigma}``."""
    m = field.mesh
    c = _cone_index(m, K, f)
    return cell_gradient(field, K) + face_residual(field, K, f) * m.cone_normal[c]


def cell_gradients(ops: GradientOperators, u: np.ndarray) -> np.ndarray:
    """All cell gradients at once, shape (n_cells, d)."""
    return np.column_stack([G @ u for G in ops.cell])


def cone_gradients(ops: GradientOperators, u: np.ndarray) -> np.ndarray:
    """All cone gradients at once, shape (n_cones, d)."""
    return np.column_stack([G @ u for G in ops.cone])
