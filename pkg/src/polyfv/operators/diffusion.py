"""Symmetric diffusion form built from cone gradients, and its flux decomposition.

``a(u, v) = sum_K sum_sigma (m_sigma d_{K,sigma} / d) grad_{K,sigma} u . grad_{K,sigma} v``
over the unknowns ``[cells, boundary faces]``.  Testing against a single cell
unknown gives ``-m_K Delta_K u``; testing against a boundary-face unknown gives
``-F_{K,sigma}(u)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..spaces import BarycentricMap, DiscreteField, gamma_masks
from .gradient import GradientOperators, build_gradients

log = logging.getLogger(__name__)


@dataclass
class DiffusionOperator:
    """Assembled diffusion matrix and its Dirichlet/Neumann partition.

    ``matrix`` acts on ``[u_K, u_sigma]`` with boundary faces in
    ``mesh.boundary_faces`` order; ``dirichlet`` masks the Gamma_1 boundary faces.
    """

    bary: BarycentricMap
    grads: GradientOperators
    matrix: sp.csr_matrix
    dirichlet: np.ndarray
    _aggregate: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def mesh(self):
        return self.bary.mesh

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def free(self) -> np.ndarray:
        """Indices of cell and Gamma_2 unknowns."""
        nc = self.n_cells
        return np.concatenate([np.arange(nc), nc + np.nonzero(~self.dirichlet)[0]])

    @property
    def fixed(self) -> np.ndarray:
        return self.n_cells + np.nonzero(self.dirichlet)[0]

    @property
    def singular(self) -> bool:
        """True without Dirichlet faces: constants are then in the kernel."""
        return not self.dirichlet.any()

    def reduced(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """``(A_ff, A_fd)``: free-free block and free-Dirichlet coupling."""
        A = self.matrix
        return A[self.free][:, self.free].tocsr(), A[self.free][:, self.fixed].tocsr()

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """``-Delta_K u`` for every cell."""
        return (self.matrix @ u)[: self.n_cells] / self.mesh.cell_volume

    def boundary_fluxes(self, u: np.ndarray) -> np.ndarray:
        """``F_{K,sigma}(u)`` for every boundary face (outward from the owner)."""
        return -(self.matrix @ u)[self.n_cells :]

    def _aggregated(self) -> sp.csr_matrix:
        """Columns ``chi_K``: a cell together with its own boundary faces."""
        if self._aggregate is None:
            m = self.mesh
            nc, nb = m.n_cells, len(m.boundary_faces)
            rows = np.concatenate([np.arange(nc), nc + np.arange(nb)])
            cols = np.concatenate([np.arange(nc), m.face_owner[m.boundary_faces]])
            self._aggregate = sp.csr_matrix((np.ones(nc + nb), (rows, cols)), shape=(nc + nb, nc))
        return self._aggregate

    def cell_fluxes(self, u: np.ndarray) -> sp.csr_matrix:
        """Antisymmetric matrix of the cell-to-cell fluxes ``F_{K,L}(u)``.

        With ``w_sigma = u_sigma - u_owner`` on boundary faces,
        ``F_KL = Abar_KL (u_L - u_K) + sum_{sigma in E_L,ext} a_{sigma,K} w_sigma
        - sum_{sigma in E_K,ext} a_{sigma,L} w_sigma``, where ``Abar`` is the form
        restricted to the aggregated cell functions.  Row sums give
        ``-m_K Delta_K u - sum_sigma F_{K,sigma}(u)``.
        """
        m = self.mesh
        nc = m.n_cells
        P = self._aggregated()
        A = self.matrix
        Abar = P.T @ A @ P
        # bitwise symmetric so that F_KL = -F_LK holds exactly
        Abar = (0.5 * (Abar + Abar.T)).tocoo()
        off = Abar.row != Abar.col
        r, c, a = Abar.row[off], Abar.col[off], Abar.data[off]
        uc = u[:nc]
        F1 = sp.csr_matrix((a * (uc[c] - uc[r]), (r, c)), shape=(nc, nc))
        own = m.face_owner[m.boundary_faces]
        w = u[nc:] - uc[own]
        T = sp.diags(w) @ (A[nc:] @ P)  # T[sigma, K] = a_{sigma,K} w_sigma
        O = sp.csr_matrix((np.ones(len(own)), (np.arange(len(own)), own)), shape=(len(own), nc))
        M2 = (O.T @ T).tocsr()
        F = F1 + (M2.T - M2)  # each part exactly antisymmetric
        F.setdiag(0.0)
        F.eliminate_zeros()
        return F.tocsr()

    def stencil(self, K: int, rtol: float = 1e-12) -> np.ndarray:
        """``N_K``: cells whose values enter the fluxes of ``K``.

        Coefficients below ``rtol`` times the row maximum are cancellation
        leftovers and are not counted.
        """
        Abar = self._aggregated().T @ self.matrix @ self._aggregated()
        row = Abar.getrow(K)
        keep = np.abs(row.data) > rtol * np.abs(row.data).max()
        return np.setdiff1d(row.indices[keep], [K])


def assemble_diffusion(
    bary: BarycentricMap,
    dirichlet_tags=(),
    grads: GradientOperators | None = None,
) -> DiffusionOperator:
    """Assemble ``A = sum_i G_i^T W G_i`` with ``W = diag(m_sigma d_{K,sigma} / d)``.

    The product is symmetrised as ``(A + A^T)/2`` so the stored matrix is
    symmetric to the last bit.
    """
    m = bary.mesh
    grads = grads or build_gradients(bary)
    W = sp.diags(m.cone_measure)
    A = sum(G.T @ W @ G for G in grads.cone)
    A = (0.5 * (A + A.T)).tocsr()
    A.sort_indices()
    dir_mask = gamma_masks(m, dirichlet_tags) if len(dirichlet_tags) else np.zeros(len(m.boundary_faces), bool)
    op = DiffusionOperator(bary, grads, A, dir_mask)
    if op.singular:
        log.info("diffusion operator without Dirichlet faces: kernel contains constants")
    return op


def discrete_laplacian_apply(op: DiffusionOperator, field: DiscreteField, K: int) -> float:
    """``-Delta_K u = (1/m_K) (sum_L F_{K,L}(u) + sum_{sigma ext} F_{K,sigma}(u))``."""
    return float(op.laplacian(field.vector())[K])
