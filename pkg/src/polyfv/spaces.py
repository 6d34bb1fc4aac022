"""Discrete spaces: barycentric face interpolation, fields and boundary data.

Interior face values are never stored.  They are reconstructed from cell
values through coefficients ``beta`` with ``sum(beta) = 1`` and
``sum(beta * x_L) = x_sigma`` so that affine functions are reproduced exactly.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh.core import Mesh, MeshError

log = logging.getLogger(__name__)

ON_SEGMENT_TOL = 1e-13
HULL_MARGIN = 0.1  # min distance (in h_K) of an added stencil cell from the current hull
SEARCH_RINGS = 2  # vertex-neighbour rings searched for a barycentric stencil


class Space(enum.Enum):
    XD = "X^D"
    X0 = "X^D_0"
    XG1 = "X^D_G1,0"


@dataclass(frozen=True)
class BarycentricMap:
    """Sparse face-interpolation weights; row ``f`` is empty for boundary faces."""

    mesh: Mesh
    matrix: sp.csr_matrix  # (n_faces, n_cells)

    def coefficients(self, f: int) -> list[tuple[int, float]]:
        row = self.matrix.getrow(f)
        return [(int(c), float(v)) for c, v in zip(row.indices, row.data)]

    @property
    def interior(self) -> sp.csr_matrix:
        """Rows of the interior faces only, in ``mesh.interior_faces`` order."""
        return self.matrix[self.mesh.interior_faces]

    def max_support(self) -> int:
        return int(np.diff(self.matrix.indptr).max(initial=0))


def _vertex_cells(mesh: Mesh) -> sp.csr_matrix:
    """Boolean vertex -> cell incidence."""
    cf = abs(mesh.cell_face_matrix())
    fv = mesh.face_vertex_matrix()
    vc = (cf @ fv).T.tocsr()
    vc.data[:] = 1.0
    return vc


def _solve_weights(X: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Minimal-norm affine weights of ``target`` in the points ``X``; last weight closes the sum."""
    M = np.vstack([X.T, np.ones(len(X))])
    rhs = np.append(target, 1.0)
    w = np.linalg.lstsq(M, rhs, rcond=None)[0]
    w[-1] = 1.0 - w[:-1].sum()
    return w


def build_barycentric_map(mesh: Mesh) -> BarycentricMap:
    """Barycentric coefficients for every interior face.

    Two-point weights are used whenever ``x_sigma`` lies on the line through
    ``x_K`` and ``x_L`` (orthogonal grids).  Otherwise candidates are ``K``,
    ``L`` and then the cells sharing a vertex with the face ordered by distance
    to ``x_sigma`` (ties by index); a candidate is taken only if it raises the
    affine rank of the selection, and the selection stops as soon as
    ``x_sigma`` lies in its affine hull (at most ``d+1`` cells).  If the
    first vertex ring is not enough, the search continues in the second ring.
    """
    d = mesh.dim
    inner = mesh.interior_faces
    K = mesh.face_owner[inner]
    L = mesh.face_neighbor[inner]
    xK, xL, xs = mesh.cell_center[K], mesh.cell_center[L], mesh.face_center[inner]
    h = mesh.cell_diameter[K]
    e = xL - xK
    t = np.einsum("ij,ij->i", xs - xK, e) / np.einsum("ij,ij->i", e, e)
    off = np.linalg.norm(xK + t[:, None] * e - xs, axis=1)
    two = off <= ON_SEGMENT_TOL * h

    rows, cols, vals = [], [], []
    f2 = inner[two]
    rows += [f2, f2]
    cols += [K[two], L[two]]
    bK = 1.0 - t[two]
    vals += [bK, 1.0 - bK]

    general = np.nonzero(~two)[0]
    if len(general):
        vc = _vertex_cells(mesh)
        cc = (vc.T @ vc).tocsr()  # cells sharing a vertex
        fv = mesh.face_vertex_matrix()
        near = (fv[inner[general]] @ vc).tocsr()
        for n, g in enumerate(general):
            f = int(inner[g])
            ring = near.indices[near.indptr[n] : near.indptr[n + 1]]
            chosen = w = None
            seen = {int(K[g]), int(L[g])}
            start = [int(K[g]), int(L[g])]
            for _ in range(SEARCH_RINGS):
                cand = np.array(sorted(set(ring.tolist()) - seen), dtype=np.int64)
                dist = np.linalg.norm(mesh.cell_center[cand] - xs[g], axis=1)
                cand = cand[np.lexsort((cand, dist))]
                chosen, w, start = _select(mesh, start, cand, xs[g], h[g], d)
                if w is not None:
                    break
                seen.update(cand.tolist())
                ring = np.unique(cc[ring].indices)
            if w is None:
                raise MeshError(f"no admissible barycentric stencil for face {f} (mesh too degenerate)")
            rows.append(np.full(len(chosen), f))
            cols.append(np.array(chosen))
            vals.append(w)
    B = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mesh.n_faces, mesh.n_cells),
    )
    B.sort_indices()
    log.debug("barycentric map: %d two-point faces, %d general", int(two.sum()), len(general))
    return BarycentricMap(mesh, B)


def _select(mesh, start, cand, target, h, d):
    """Grow ``start`` with rank-raising candidates until ``target`` is in the affine hull.

    Returns (cells, weights, selection); weights are None when the candidates
    run out, and the selection can then seed a wider search.
    """
    chosen = list(start)
    for c in [None] + list(cand):
        if c is not None:
            X = mesh.cell_center[chosen]
            Q = np.linalg.qr((X[1:] - X[0]).T)[0]
            r = mesh.cell_center[c] - X[0]
            # a cell too close to the current hull would give huge weights
            if np.linalg.norm(r - Q @ (Q.T @ r)) < HULL_MARGIN * h:
                continue
            chosen = chosen + [int(c)]
        X = mesh.cell_center[chosen]
        w = _solve_weights(X, target)
        if np.linalg.norm(w @ X - target) <= 1e-12 * h:
            return chosen, w, chosen
        if len(chosen) == d + 1:
            break
    return chosen, None, chosen


@dataclass
class DiscreteField:
    """Cell values plus boundary-face values of a scalar or ``d``-vector field.

    ``boundary`` follows the order of ``mesh.boundary_faces``.  Interior face
    values are always derived through the barycentric map.
    """

    bary: BarycentricMap
    cells: np.ndarray
    boundary: np.ndarray
    space: Space = Space.XD
    gamma1: np.ndarray | None = None  # boolean mask over boundary faces, for X^D_G1,0

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float)
        self.boundary = np.asarray(self.boundary, dtype=float)
        m = self.bary.mesh
        if self.cells.shape[0] != m.n_cells or self.boundary.shape[0] != len(m.boundary_faces):
            raise ValueError("field size does not match the mesh")
        if self.space is Space.X0 and np.any(self.boundary != 0):
            raise ValueError("X^D_0 field must vanish on every boundary face")
        if self.space is Space.XG1:
            if self.gamma1 is None:
                raise ValueError("X^D_G1,0 field needs the Gamma_1 face mask")
            if np.any(self.boundary[self.gamma1] != 0):
                raise ValueError("X^D_G1,0 field must vanish on Gamma_1 faces")

    @property
    def mesh(self) -> Mesh:
        return self.bary.mesh

    @property
    def n_components(self) -> int:
        return 1 if self.cells.ndim == 1 else self.cells.shape[1]

    @classmethod
    def zeros(cls, bary: BarycentricMap, components: int = 1, space: Space = Space.XD, gamma1=None):
        m = bary.mesh
        shape = () if components == 1 else (components,)
        return cls(bary, np.zeros((m.n_cells,) + shape), np.zeros((len(m.boundary_faces),) + shape), space, gamma1)

    @classmethod
    def from_function(cls, bary: BarycentricMap, fn: Callable, space: Space = Space.XD):
        """Sample ``fn`` at collocation points and boundary face barycenters."""
        m = bary.mesh
        cells = np.asarray(fn(m.cell_center), dtype=float)
        bnd = np.asarray(fn(m.face_center[m.boundary_faces]), dtype=float)
        if space is Space.X0:
            bnd = np.zeros_like(bnd)
        return cls(bary, cells, bnd, space)

    def face_values(self) -> np.ndarray:
        """Values on every face: barycentric on interior faces, stored on the boundary."""
        out = self.bary.matrix @ self.cells
        out[self.mesh.boundary_faces] = self.boundary
        return out

    def vector(self) -> np.ndarray:
        """Scalar field as the unknown vector ``[cells, boundary faces]``."""
        if self.n_components != 1:
            raise ValueError("vector() is defined for scalar fields only")
        return np.concatenate([self.cells, self.boundary])


def face_value(field: DiscreteField, f: int):
    """Value of ``field`` on interior face ``f``: ``sum_L beta_L v_L``."""
    m = field.mesh
    if m.face_neighbor[f] < 0:
        raise ValueError(f"face {f} is a boundary face")
    row = field.bary.matrix.getrow(f)
    return row.data @ field.cells[row.indices]


def gamma_masks(mesh: Mesh, dirichlet_tags) -> np.ndarray:
    """Boolean mask over boundary faces: True where the face belongs to Gamma_1."""
    tags = mesh.face_tags[mesh.boundary_faces]
    if np.any(tags == ""):
        bad = mesh.boundary_faces[tags == ""]
        raise MeshError(f"untagged boundary faces {bad[:10].tolist()} cannot be assigned to Gamma_1 or Gamma_2")
    return np.isin(tags, list(dirichlet_tags))


def project_dirichlet_boundary(T_b: Callable, bary: BarycentricMap, dirichlet_tags) -> DiscreteField:
    """Element with zero cell values and ``T_sigma = T_b(x_sigma)`` on Gamma_1 faces.

    One-point (centroid) quadrature: exact for data affine on each face.
    """
    m = bary.mesh
    g1 = gamma_masks(m, dirichlet_tags)
    bnd = np.zeros(len(m.boundary_faces))
    faces = m.boundary_faces[g1]
    if len(faces):
        bnd[g1] = np.asarray(T_b(m.face_center[faces]), dtype=float)
    return DiscreteField(bary, np.zeros(m.n_cells), bnd, Space.XD)


@dataclass(frozen=True)
class CellwiseView:
    """``P_M v``: the piecewise-constant function with value ``v_K`` on ``K``."""

    field: DiscreteField

    def __call__(self, k):
        return self.field.cells[k]

    def integrate(self) -> np.ndarray:
        m = self.field.mesh
        return np.tensordot(m.cell_volume, self.field.cells, axes=(0, 0))


@dataclass(frozen=True)
class BoundaryView:
    """``P_E v``: the boundary trace with value ``v_sigma`` on each boundary face."""

    field: DiscreteField

    def __call__(self, f):
        m = self.field.mesh
        pos = np.searchsorted(m.boundary_faces, f)
        if np.any(m.boundary_faces[pos] != f):
            raise ValueError("not a boundary face")
        return self.field.boundary[pos]

    def integrate(self, tags=None) -> np.ndarray:
        m = self.field.mesh
        area = m.face_area[m.boundary_faces]
        if tags is not None:
            area = area * np.isin(m.face_tags[m.boundary_faces], list(tags))
        return np.tensordot(area, self.field.boundary, axes=(0, 0))


def project_cellwise(field: DiscreteField) -> CellwiseView:
    return CellwiseView(field)


def project_boundary(field: DiscreteField) -> BoundaryView:
    return BoundaryView(field)
