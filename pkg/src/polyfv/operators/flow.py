"""Divergence, dual pressure gradient, stabilized mass flux and transport.

Velocities live in ``X^D_0`` (zero on every boundary face), so only interior
faces carry mass flux.  Face quantities are indexed by ``mesh.interior_faces``
and oriented from the owner cell to the neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..spaces import BarycentricMap, DiscreteField

TRANSPORT_MODES = ("centered", "upwind")


@dataclass(frozen=True)
class FlowOperators:
    """Sparse building blocks of the mass flux and its transport.

    ``Phi = sum_i Fu[i] @ u_i + Fp @ p`` gives the owner-oriented flux on every
    interior face; ``div[i] = inc @ Fu[i]`` maps ``u_i`` to ``m_K div_K u``.
    """

    bary: BarycentricMap
    lam: np.ndarray  # lambda_sigma per interior face
    inc: sp.csr_matrix  # (n_cells, n_int): +1 owner, -1 neighbour
    own: sp.csr_matrix  # (n_int, n_cells) owner selector
    nbr: sp.csr_matrix  # (n_int, n_cells) neighbour selector
    Fu: tuple
    Fp: sp.csr_matrix
    div: tuple

    @property
    def mesh(self):
        return self.bary.mesh

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    def mass_flux(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """``Phi_{K,sigma}`` on interior faces, ``u`` of shape (n_cells, d)."""
        return sum(F @ u[:, i] for i, F in enumerate(self.Fu)) + self.Fp @ p

    def mass_balance(self, u: np.ndarray, p: np.ndarray) -> np.ndarray:
        """``sum_sigma Phi_{K,sigma}`` per cell."""
        return self.inc @ self.mass_flux(u, p)

    def divergence(self, u: np.ndarray) -> np.ndarray:
        """``div_K u`` for every cell."""
        return sum(D @ u[:, i] for i, D in enumerate(self.div)) / self.mesh.cell_volume

    def pressure_gradient(self, p: np.ndarray) -> np.ndarray:
        """``grad^_K p`` for every cell, shape (n_cells, d), dual to the divergence."""
        return np.column_stack([-(D.T @ p) for D in self.div]) / self.mesh.cell_volume[:, None]

    def transport(self, w: np.ndarray, phi: np.ndarray, mode: str = "centered") -> np.ndarray:
        """``m_K div^lambda_K(w, u, p)`` for cell values ``w`` and face fluxes ``phi``.

        The centered scheme uses the difference form ``Phi (w_L - w_K) / 2``,
        which equals the sum form when every cell is mass balanced.
        """
        wo, wn = self.own @ w, self.nbr @ w
        if mode == "centered":
            return 0.5 * (abs(self.inc) @ (phi * (wn - wo)))
        if mode == "upwind":
            return self.inc @ (np.maximum(phi, 0.0) * wo + np.minimum(phi, 0.0) * wn)
        raise ValueError(f"unknown transport mode {mode!r}")

    def transport_sum_form(self, w: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Centered transport in the form ``sum Phi (w_K + w_L) / 2``."""
        return self.inc @ (phi * 0.5 * (self.own @ w + self.nbr @ w))

    def transport_jacobians(self, w: np.ndarray, phi: np.ndarray, mode: str = "centered"):
        """``(d t / d w, d t / d phi)`` of :meth:`transport`."""
        wo, wn = self.own @ w, self.nbr @ w
        if mode == "centered":
            half = 0.5 * abs(self.inc)
            return half @ sp.diags(phi) @ (self.nbr - self.own), half @ sp.diags(wn - wo)
        if mode == "upwind":
            pos = (phi > 0).astype(float)
            dw = self.inc @ (sp.diags(pos * phi) @ self.own + sp.diags((1 - pos) * phi) @ self.nbr)
            return dw, self.inc @ sp.diags(pos * wo + (1 - pos) * wn)
        raise ValueError(f"unknown transport mode {mode!r}")


def build_flow_operators(bary: BarycentricMap, lam=0.0) -> FlowOperators:
    """Assemble the flux matrices; ``lam`` is a scalar or a per-interior-face array."""
    m = bary.mesh
    inner = m.interior_faces
    ni, nc = len(inner), m.n_cells
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (ni,)).copy()
    if np.any(lam < 0):
        raise ValueError("lambda_sigma must be non-negative")
    K, L = m.face_owner[inner], m.face_neighbor[inner]
    r = np.arange(ni)
    own = sp.csr_matrix((np.ones(ni), (r, K)), shape=(ni, nc))
    nbr = sp.csr_matrix((np.ones(ni), (r, L)), shape=(ni, nc))
    inc = (own - nbr).T.tocsr()
    area = m.face_area[inner]
    B = bary.interior
    Fu = tuple((sp.diags(area * m.face_normal[inner, i]) @ B).tocsr() for i in range(m.dim))
    Fp = (sp.diags(area * lam) @ (own - nbr)).tocsr()
    div = tuple((inc @ F).tocsr() for F in Fu)
    return FlowOperators(bary, lam, inc, own, nbr, Fu, Fp, div)


def _velocity_cells(velocity) -> np.ndarray:
    if isinstance(velocity, DiscreteField):
        if np.any(velocity.boundary != 0):
            raise ValueError("velocity must vanish on the boundary (X^D_0)")
        return velocity.cells
    return np.asarray(velocity, dtype=float)


def _cells(field) -> np.ndarray:
    return field.cells if isinstance(field, DiscreteField) else np.asarray(field, dtype=float)


def cell_divergence(ops: FlowOperators, velocity, K: int) -> float:
    """``div_K u = (1/m_K) sum_sigma m_sigma u_sigma . n_{K,sigma}``."""
    return float(ops.divergence(_velocity_cells(velocity))[K])


def pressure_gradient(ops: FlowOperators, p, K: int) -> np.ndarray:
    """``grad^_K p``, defined so that ``sum m_K grad^_K p . v_K = -sum m_K p_K div_K v``."""
    return ops.pressure_gradient(_cells(p))[K]


def mass_flux(ops: FlowOperators, velocity, p, K: int, face: int) -> float:
    """``Phi_{K,sigma} = m_sigma (u_sigma . n_{K,sigma} + lambda_sigma (p_K - p_L))``."""
    m = ops.mesh
    pos = np.searchsorted(m.interior_faces, face)
    if pos >= len(m.interior_faces) or m.interior_faces[pos] != face:
        raise ValueError(f"face {face} is not an interior face")
    phi = ops.mass_flux(_velocity_cells(velocity), _cells(p))[pos]
    if K == m.face_owner[face]:
        return float(phi)
    if K == m.face_neighbor[face]:
        return float(-phi)
    raise ValueError(f"face {face} does not bound cell {K}")


def transport_centered(ops: FlowOperators, w, velocity, p, K: int) -> float:
    """``div^lambda_K(w, u, p)`` in the difference form."""
    phi = ops.mass_flux(_velocity_cells(velocity), _cells(p))
    return float(ops.transport(_cells(w), phi, "centered")[K] / ops.mesh.cell_volume[K])


def transport_upwind(ops: FlowOperators, w, velocity, p, K: int) -> float:
    """Upwind ``div^{lambda,up}_K(w, u, p)``."""
    phi = ops.mass_flux(_velocity_cells(velocity), _cells(p))
    return float(ops.transport(_cells(w), phi, "upwind")[K] / ops.mesh.cell_volume[K])
