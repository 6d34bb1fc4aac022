"""Cluster partition used to localise the pressure stabilisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh.core import Mesh


@dataclass(frozen=True)
class ClusterPartition:
    mesh: Mesh
    assignment: np.ndarray  # cell -> cluster id
    isolated: np.ndarray  # cells left alone by the sweep and attached afterwards

    @property
    def n_clusters(self) -> int:
        return int(self.assignment.max()) + 1

    def members(self, g: int) -> np.ndarray:
        return np.nonzero(self.assignment == g)[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters)

    def face_mask(self) -> np.ndarray:
        """True for interior faces whose two cells share a cluster (mesh.interior_faces order)."""
        inner = self.mesh.interior_faces
        a = self.assignment
        return a[self.mesh.face_owner[inner]] == a[self.mesh.face_neighbor[inner]]

    def lambda_map(self, lam: float) -> np.ndarray:
        """``lambda_sigma`` on interior faces: ``lam`` inside a cluster, 0 across clusters."""
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        return np.where(self.face_mask(), float(lam), 0.0)


def build_clusters(mesh: Mesh) -> ClusterPartition:
    """Two-step cluster construction.

    Sweep the cells in index order and open the cluster ``{K} + neighbours(K)``
    whenever none of these cells is assigned yet.  Each cell left over is then
    attached to the adjacent cluster with which it shares the most faces
    (ties to the lowest cluster id).
    """
    adj = mesh.cell_adjacency().tocsr()
    nc = mesh.n_cells
    assign = np.full(nc, -1, dtype=np.int64)
    n = 0
    for k in range(nc):
        group = np.append(adj.indices[adj.indptr[k] : adj.indptr[k + 1]], k)
        if np.all(assign[group] < 0):
            assign[group] = n
            n += 1
    isolated = np.nonzero(assign < 0)[0]
    first = assign.copy()
    inner = mesh.interior_faces
    o, nb = mesh.face_owner[inner], mesh.face_neighbor[inner]
    for k in isolated:
        other = np.concatenate([nb[o == k], o[nb == k]])  # one entry per shared face
        ids = first[other]
        ids = ids[ids >= 0]
        counts = np.bincount(ids)
        assign[k] = int(np.argmax(counts))  # argmax picks the lowest id on ties
    return ClusterPartition(mesh, assign, isolated)
