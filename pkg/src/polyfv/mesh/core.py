"""Polyhedral mesh data model.

A mesh is stored face-based: every face is a polygon (an edge segment in 2D)
given by an ordered list of vertex indices whose orientation defines the unit
normal pointing out of the owner cell.  Interior faces also carry a neighbor
cell, boundary faces carry a tag instead.  All geometric quantities used by the
discretization (measures, barycenters, normals, cone heights) are computed once
at construction and the object is treated as read-only afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

PLANARITY_TOL = 1e-9


@dataclass(frozen=True)
class Cell:
    index: int
    faces: np.ndarray
    measure: float
    diameter: float
    center: np.ndarray


@dataclass(frozen=True)
class Face:
    index: int
    vertices: np.ndarray
    measure: float
    center: np.ndarray
    owner: int
    neighbor: int | None
    normal: np.ndarray
    tag: str | None


@dataclass(frozen=True)
class Cone:
    """Sub-volume with apex at the collocation point of ``cell`` and base ``face``."""

    cell: int
    face: int
    measure: float


class MeshError(ValueError):
    """Raised when a mesh cannot be built or violates a hard invariant."""


def _csr_from_lists(lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    counts = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    idx = np.fromiter((i for x in lists for i in x), dtype=np.int64, count=int(ptr[-1]))
    return ptr, idx


def padded_rows(ptr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """CSR rows padded to equal length by repeating each row's last entry."""
    counts = np.diff(ptr)
    width = int(counts.max()) if len(counts) else 0
    offs = np.minimum(np.arange(width)[None, :], counts[:, None] - 1)
    return idx[ptr[:-1, None] + offs]


def polygon_geometry(points: np.ndarray, ptr: np.ndarray, idx: np.ndarray):
    """Measure, barycenter, unit normal and fan sub-simplices of polygonal faces.

    In 3D the polygon is fanned from the mean of its vertices; the area vector
    is the sum of the triangle area vectors, so that closed surfaces have zero
    total area vector even when a face is not planar.  Returns
    ``(area, center, normal, tri_area_vec, tri_center)`` where the last two have
    shape ``(n_faces, n_sub, d)``.
    """
    dim = points.shape[1]
    counts = np.diff(ptr)
    if dim == 2:
        if np.any(counts != 2):
            raise MeshError("2D faces must have exactly two vertices")
        v0 = points[idx[ptr[:-1]]]
        v1 = points[idx[ptr[:-1] + 1]]
        e = v1 - v0
        avec = np.stack([e[:, 1], -e[:, 0]], axis=1)
        area = np.linalg.norm(avec, axis=1)
        center = 0.5 * (v0 + v1)
        normal = avec / area[:, None]
        return area, center, normal, avec[:, None, :], center[:, None, :]

    pad = padded_rows(ptr, idx)
    V = points[pad]
    width = pad.shape[1]
    mask = np.arange(width)[None, :] < counts[:, None]
    c = (V * mask[..., None]).sum(axis=1) / counts[:, None]
    # successor of each vertex; padded slots map onto themselves (zero-area fans)
    i = np.arange(width)[None, :]
    k = counts[:, None]
    nxt = np.where(i + 1 < k, i + 1, np.where(i == k - 1, 0, i))
    Vn = V[np.arange(len(counts))[:, None], nxt]
    a = 0.5 * np.cross(V - c[:, None, :], Vn - c[:, None, :])
    g = (c[:, None, :] + V + Vn) / 3.0
    avec = a.sum(axis=1)
    area = np.linalg.norm(avec, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = avec / area[:, None]
        w = np.einsum("fkd,fd->fk", a, normal)
        center = np.einsum("fk,fkd->fd", w, g) / w.sum(axis=1)[:, None]
    return area, center, normal, a, g


def planarity_defect(points: np.ndarray, ptr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Max vertex distance to the least-squares plane of each face (0 in 2D)."""
    nf = len(ptr) - 1
    out = np.zeros(nf)
    if points.shape[1] == 2:
        return out
    counts = np.diff(ptr)
    for k in np.unique(counts):
        if k <= 3:
            continue
        sel = np.nonzero(counts == k)[0]
        V = points[idx[ptr[sel, None] + np.arange(k)[None, :]]]
        Vc = V - V.mean(axis=1, keepdims=True)
        _, _, vt = np.linalg.svd(Vc)
        nrm = vt[:, -1, :]
        out[sel] = np.abs(np.einsum("fkd,fd->fk", Vc, nrm)).max(axis=1)
    return out


class Mesh:
    """General polyhedral (d=3) or polygonal (d=2) mesh.

    Parameters
    ----------
    points : (n_vertices, d) array
    faces : sequence of vertex index sequences, ordered so that the
        right-hand-rule normal (3D) or the rotated edge ``(dy, -dx)`` (2D)
        points out of the owner cell.
    owner, neighbor : per-face cell indices; ``neighbor = -1`` marks a
        boundary face.
    cell_centers : collocation points ``x_K``; gravity centers when omitted.
    face_tags : tag per face (ignored for interior faces).
    metadata : free-form dictionary kept with the mesh (generator, N, seed...).
    """

    def __init__(
        self,
        points,
        faces,
        owner,
        neighbor,
        cell_centers=None,
        face_tags=None,
        metadata: dict | None = None,
    ):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.dim = self.points.shape[1]
        if self.dim not in (2, 3):
            raise MeshError(f"unsupported dimension {self.dim}")
        if isinstance(faces, tuple) and len(faces) == 2 and isinstance(faces[0], np.ndarray):
            self.face_ptr, self.face_idx = (np.asarray(a, dtype=np.int64) for a in faces)
        else:
            self.face_ptr, self.face_idx = _csr_from_lists(faces)
        self.face_owner = np.asarray(owner, dtype=np.int64)
        self.face_neighbor = np.asarray(neighbor, dtype=np.int64)
        self.n_faces = len(self.face_ptr) - 1
        if len(self.face_owner) != self.n_faces or len(self.face_neighbor) != self.n_faces:
            raise MeshError("owner/neighbor arrays do not match the face count")
        self.n_cells = int(max(self.face_owner.max(), self.face_neighbor.max())) + 1
        self.metadata = dict(metadata or {})

        self.is_boundary = self.face_neighbor < 0
        self.boundary_faces = np.nonzero(self.is_boundary)[0]
        self.interior_faces = np.nonzero(~self.is_boundary)[0]
        tags = np.full(self.n_faces, "", dtype=object)
        if face_tags is not None:
            tags[:] = list(face_tags)
        tags[~self.is_boundary] = ""
        self.face_tags = tags

        (
            self.face_area,
            self.face_center,
            self.face_normal,
            self._tri_avec,
            self._tri_center,
        ) = polygon_geometry(self.points, self.face_ptr, self.face_idx)
        if np.any(~(self.face_area > 0)):
            bad = np.nonzero(~(self.face_area > 0))[0]
            raise MeshError(f"faces with non-positive measure: {bad[:10].tolist()}")

        self._build_cones()
        self._cell_volumes()
        if cell_centers is None:
            self.cell_center = self.cell_centroid.copy()
        else:
            self.cell_center = np.array(cell_centers, dtype=float)
            if self.cell_center.shape != (self.n_cells, self.dim):
                raise MeshError("cell_centers has the wrong shape")
        self._cone_metrics()
        self.cell_diameter = self._diameters()

    # ------------------------------------------------------------------
    # construction helpers

    def _build_cones(self):
        nf = self.n_faces
        f_all = np.arange(nf)
        inner = self.interior_faces
        cells = np.concatenate([self.face_owner, self.face_neighbor[inner]])
        faces = np.concatenate([f_all, inner])
        signs = np.concatenate([np.ones(nf), -np.ones(len(inner))])
        order = np.lexsort((faces, cells))
        self.cone_cell = cells[order]
        self.cone_face = faces[order]
        self.cone_sign = signs[order]
        self.cell_cone_ptr = np.searchsorted(self.cone_cell, np.arange(self.n_cells + 1))
        if np.any(np.diff(self.cell_cone_ptr) == 0):
            raise MeshError("some cells have no faces")
        self.n_cones = len(self.cone_cell)

    def _cell_volumes(self):
        d = self.dim
        ref = np.zeros((self.n_cells, d))
        np.add.at(ref, self.cone_cell, self.face_center[self.cone_face])
        ref /= np.diff(self.cell_cone_ptr)[:, None]
        a = self._tri_avec[self.cone_face] * self.cone_sign[:, None, None]
        g = self._tri_center[self.cone_face]
        rel = g - ref[self.cone_cell][:, None, :]
        vol = np.einsum("ckd,ckd->ck", a, rel) / d
        cen = (ref[self.cone_cell][:, None, :] + d * g) / (d + 1)
        volume = np.bincount(self.cone_cell, weights=vol.sum(axis=1), minlength=self.n_cells)
        mom = np.zeros((self.n_cells, d))
        np.add.at(mom, self.cone_cell, np.einsum("ck,ckd->cd", vol, cen))
        self.cell_volume = volume
        with np.errstate(invalid="ignore", divide="ignore"):
            self.cell_centroid = mom / volume[:, None]
        if np.any(~(volume > 0)):
            bad = np.nonzero(~(volume > 0))[0]
            raise MeshError(f"cells with non-positive volume: {bad[:10].tolist()}")

    def _cone_metrics(self):
        self.cone_normal = self.face_normal[self.cone_face] * self.cone_sign[:, None]
        self.cone_area = self.face_area[self.cone_face]
        rel = self.face_center[self.cone_face] - self.cell_center[self.cone_cell]
        self.cone_dist = np.einsum("cd,cd->c", rel, self.cone_normal)
        self.cone_measure = self.cone_area * self.cone_dist / self.dim

    def _diameters(self):
        fv = self.face_vertex_matrix()
        cv = (self.cell_face_matrix() @ fv).tocsr()
        cv.sort_indices()
        pad = padded_rows(cv.indptr.astype(np.int64), cv.indices.astype(np.int64))
        P = self.points[pad]
        diam = np.zeros(self.n_cells)
        chunk = max(1, 2_000_000 // max(1, pad.shape[1] ** 2))
        for s in range(0, self.n_cells, chunk):
            Q = P[s : s + chunk]
            dd = np.linalg.norm(Q[:, :, None, :] - Q[:, None, :, :], axis=-1)
            diam[s : s + chunk] = dd.max(axis=(1, 2))
        return diam

    # ------------------------------------------------------------------
    # topology accessors

    def face_vertices(self, f: int) -> np.ndarray:
        return self.face_idx[self.face_ptr[f] : self.face_ptr[f + 1]]

    def cell_faces(self, k: int) -> np.ndarray:
        return self.cone_face[self.cell_cone_ptr[k] : self.cell_cone_ptr[k + 1]]

    def cell_cones(self, k: int) -> slice:
        return slice(self.cell_cone_ptr[k], self.cell_cone_ptr[k + 1])

    def face_vertex_matrix(self) -> sp.csr_matrix:
        """Boolean incidence (n_faces x n_vertices)."""
        data = np.ones(len(self.face_idx))
        return sp.csr_matrix(
            (data, self.face_idx, self.face_ptr), shape=(self.n_faces, len(self.points))
        )

    def cell_face_matrix(self) -> sp.csr_matrix:
        """Signed incidence (n_cells x n_faces): +1 owner, -1 neighbor."""
        return sp.csr_matrix(
            (self.cone_sign, (self.cone_cell, self.cone_face)),
            shape=(self.n_cells, self.n_faces),
        )

    def cell_adjacency(self) -> sp.csr_matrix:
        """Symmetric cell-to-cell matrix counting shared interior faces."""
        f = self.interior_faces
        K, L = self.face_owner[f], self.face_neighbor[f]
        A = sp.coo_matrix(
            (np.ones(2 * len(f)), (np.r_[K, L], np.r_[L, K])), shape=(self.n_cells,) * 2
        )
        return A.tocsr()

    def neighbors(self, k: int) -> np.ndarray:
        faces = self.cell_faces(k)
        other = np.where(self.face_owner[faces] == k, self.face_neighbor[faces], self.face_owner[faces])
        return np.unique(other[other >= 0])

    def faces_with_tag(self, *tags: str) -> np.ndarray:
        return self.boundary_faces[np.isin(self.face_tags[self.boundary_faces], tags)]

    @property
    def boundary_tags(self) -> list[str]:
        return sorted(set(self.face_tags[self.boundary_faces]))

    @property
    def max_diameter(self) -> float:
        return float(self.cell_diameter.max())

    # ------------------------------------------------------------------
    # record views

    def cell(self, k: int) -> Cell:
        return Cell(
            index=k,
            faces=self.cell_faces(k).copy(),
            measure=float(self.cell_volume[k]),
            diameter=float(self.cell_diameter[k]),
            center=self.cell_center[k].copy(),
        )

    def face(self, f: int) -> Face:
        nb = int(self.face_neighbor[f])
        return Face(
            index=f,
            vertices=self.face_vertices(f).copy(),
            measure=float(self.face_area[f]),
            center=self.face_center[f].copy(),
            owner=int(self.face_owner[f]),
            neighbor=None if nb < 0 else nb,
            normal=self.face_normal[f].copy(),
            tag=self.face_tags[f] or None,
        )

    def cones(self, k: int) -> list[Cone]:
        s = self.cell_cones(k)
        return [
            Cone(cell=k, face=int(f), measure=float(m))
            for f, m in zip(self.cone_face[s], self.cone_measure[s])
        ]

    def __repr__(self):
        gen = self.metadata.get("generator", "custom")
        return (
            f"Mesh(d={self.dim}, cells={self.n_cells}, faces={self.n_faces}, "
            f"boundary={len(self.boundary_faces)}, generator={gen!r})"
        )


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    offenders: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tolerance)


@dataclass
class QualityReport:
    checks: dict[str, Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [n for n, c in self.checks.items() if not c.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {
                n: {
                    "value": float(c.value),
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                    "offenders": [int(i) for i in c.offenders[:20]],
                }
                for n, c in self.checks.items()
            },
        }

    def __str__(self):
        lines = []
        for n, c in self.checks.items():
            flag = "ok  " if c.passed else "FAIL"
            lines.append(f"{flag} {n:<18s} {c.value:10.3e} (tol {c.tolerance:.1e})")
        return "\n".join(lines)


def validate(mesh: Mesh, rtol: float = 1e-12, planarity_tol: float = PLANARITY_TOL) -> QualityReport:
    """Check every geometric invariant of ``mesh`` and report max violations."""
    checks: dict[str, Check] = {}
    d = mesh.dim
    nc = mesh.n_cells

    def add(name, per_item, tol, scale=None):
        v = np.asarray(per_item, dtype=float)
        v = np.where(np.isfinite(v), v, np.inf)
        bad = np.nonzero(v > tol)[0]
        checks[name] = Check(name, float(v.max()) if len(v) else 0.0, tol, bad.tolist())

    measure = mesh.metadata.get("domain_measure")
    if measure is not None:
        rel = abs(mesh.cell_volume.sum() - measure) / measure
        checks["domain_measure"] = Check("domain_measure", rel, rtol)

    add("cell_measure", np.where(mesh.cell_volume > 0, 0.0, np.inf), 0.0)
    add("face_measure", np.where(mesh.face_area > 0, 0.0, np.inf), 0.0)
    add("unit_normal", np.abs(np.linalg.norm(mesh.face_normal, axis=1) - 1.0), 1e-14)

    owner, nb = mesh.face_owner, mesh.face_neighbor
    topo = np.zeros(mesh.n_faces)
    topo[(owner < 0) | (owner >= nc)] = np.inf
    topo[(nb >= nc) | (nb == owner)] = np.inf
    add("adjacency", topo, 0.0)

    add("star_shaped", np.where(mesh.cone_dist > 0, 0.0, -mesh.cone_dist + 1.0), 0.0)
    bad_cones = np.nonzero(~(mesh.cone_dist > 0))[0]
    checks["star_shaped"].offenders = np.unique(mesh.cone_cell[bad_cones]).tolist()

    cc = mesh.cone_cell
    Am = mesh.cone_area[:, None] * mesh.cone_normal
    closed = np.zeros((nc, d))
    np.add.at(closed, cc, Am)
    surf = np.bincount(cc, weights=mesh.cone_area, minlength=nc)
    add("closedness", np.abs(closed).max(axis=1) / surf, rtol)

    rel = mesh.face_center[mesh.cone_face] - mesh.cell_center[cc]
    T = np.zeros((nc, d, d))
    np.add.at(T, cc, np.einsum("ci,cj->cij", rel * mesh.cone_area[:, None], mesh.cone_normal))
    T -= mesh.cell_volume[:, None, None] * np.eye(d)[None]
    add("tensor_identity", np.abs(T).max(axis=(1, 2)) / mesh.cell_volume, rtol)

    cone_sum = np.bincount(cc, weights=mesh.cone_measure, minlength=nc)
    add("cone_volumes", np.abs(cone_sum - mesh.cell_volume) / mesh.cell_volume, rtol)

    planar = planarity_defect(mesh.points, mesh.face_ptr, mesh.face_idx)
    add("planarity", planar / mesh.cell_diameter[owner], planarity_tol)
    return QualityReport(checks)
