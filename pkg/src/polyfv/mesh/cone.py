"""Cut-cell mesh of a truncated cone embedded in a uniform cube grid.

The lateral surface ``(x-0.5)^2 + (y-0.5)^2 = ((6-5z)/12)^2`` is replaced by
``M`` planar secant facets so that every cut face is planar and neighbouring
cut cells share identical face polygons.  Facet offsets are scaled so each
horizontal cross-section keeps the area of the exact disc, hence the mesh
volume equals the analytic frustum volume up to rounding.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .core import Mesh, MeshError
from .generators import _check_n, _grid_points, _structured_topology

log = logging.getLogger(__name__)

R_BOTTOM = 0.5
R_TOP = 1.0 / 12.0
MERGE_FRACTION = 0.1


def frustum_volume(height: float = 1.0, r1: float = R_BOTTOM, r2: float = R_TOP) -> float:
    return np.pi * height / 3.0 * (r1 * r1 + r1 * r2 + r2 * r2)


def cone_radius(z):
    return (6.0 - 5.0 * np.asarray(z)) / 12.0


def facet_count(N: int) -> int:
    """Number of lateral facets: about pi*N, rounded up to a multiple of 4."""
    return int(4 * np.ceil(np.pi * N / 4.0))


def lateral_planes(M: int):
    """Half-spaces ``n.x <= b`` (unit ``n``) of the polygonal cone, caps excluded."""
    theta = 2.0 * np.pi * np.arange(M) / M
    s = np.sqrt((np.pi / M) / np.tan(np.pi / M))
    n = np.stack([np.cos(theta), np.sin(theta), np.full(M, 5.0 * s / 12.0)], axis=1)
    b = s / 2.0 + 0.5 * (n[:, 0] + n[:, 1])
    norm = np.linalg.norm(n, axis=1)
    return n / norm[:, None], b / norm


def _clip(poly, n, b, eps):
    """Sutherland-Hodgman clip of a 3D polygon against ``n.x <= b``."""
    if len(poly) == 0:
        return poly
    g = poly @ n - b
    out = []
    k = len(poly)
    for i in range(k):
        j = (i + 1) % k
        pi, pj, gi, gj = poly[i], poly[j], g[i], g[j]
        if gi <= eps:
            out.append(pi)
        if (gi < -eps and gj > eps) or (gi > eps and gj < -eps):
            t = gi / (gi - gj)
            out.append(pi + t * (pj - pi))
    return np.array(out) if out else np.zeros((0, 3))


def _clip_all(poly, planes, eps):
    for n, b in planes:
        poly = _clip(poly, n, b, eps)
        if len(poly) < 3:
            return np.zeros((0, 3))
    return poly


def _plane_polygon(n, b, lo, hi):
    """Oriented (normal ``n``) polygon of the plane ``n.x = b`` inside a box."""
    c = 0.5 * (lo + hi)
    origin = c + (b - n @ c) * n
    a = np.eye(3)[np.argmin(abs(n))]
    u = np.cross(n, a)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    r = 2.0 * np.linalg.norm(hi - lo)
    big = origin + r * np.array([u + v, -u + v, -u - v, u - v])
    box = [(np.eye(3)[a], hi[a]) for a in range(3)] + [(-np.eye(3)[a], -lo[a]) for a in range(3)]
    return _clip_all(big, box, 0.0)


def _area(poly):
    if len(poly) < 3:
        return 0.0
    a = np.zeros(3)
    for i in range(1, len(poly) - 1):
        a += np.cross(poly[i] - poly[0], poly[i + 1] - poly[0])
    return 0.5 * np.linalg.norm(a)


def build_truncated_cone(N: int, n_facets: int | None = None) -> Mesh:
    """Cubes of size ``1/N`` clipped against a truncated cone, small cut cells merged.

    Boundary tags are ``bottom`` (z=0), ``top`` (z=1) and ``lateral``.
    Cells of volume below ``0.1/N^3`` are merged into the neighbour across the
    largest shared face area.  Collocation points are cell gravity centers.
    """
    N = _check_n(N)
    if N < 4:
        raise MeshError(f"truncated cone needs N >= 4, got {N}")
    M = facet_count(N) if n_facets is None else int(n_facets)
    pn, pb = lateral_planes(M)
    h = 1.0 / N
    eps = 1e-13
    x = np.linspace(0.0, 1.0, N + 1)
    gpts = _grid_points([x, x, x])
    gval = gpts @ pn.T - pb  # (n_vertices, M)

    faces, owner, neighbor, _ = _structured_topology((N, N, N))
    # grid faces: full / empty / cut
    fval = gval[faces]  # (nf, 4, M)
    f_out = fval > eps
    f_full = ~f_out.any(axis=(1, 2))
    f_empty = (fval >= -eps).all(axis=1).any(axis=1) & ~f_full

    # cube corner vertices
    nv1 = N + 1
    i, j, k = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    i, j, k = (a.transpose(2, 1, 0).ravel() for a in (i, j, k))
    base = i + nv1 * (j + nv1 * k)
    corners = base[:, None] + np.array(
        [0, 1, nv1, nv1 + 1, nv1 * nv1, nv1 * nv1 + 1, nv1 * nv1 + nv1, nv1 * nv1 + nv1 + 1]
    )
    cval = gval[corners]
    c_full = ~(cval > eps).any(axis=(1, 2))
    c_empty = (cval >= -eps).all(axis=1).any(axis=1) & ~c_full

    polys: list[np.ndarray] = []
    p_owner: list[int] = []
    p_neigh: list[int] = []
    p_tag: list[str] = []
    min_area = 1e-12 * h * h

    def add(poly, o, nb, tag):
        if len(poly) >= 3 and _area(poly) > min_area:
            polys.append(poly)
            p_owner.append(o)
            p_neigh.append(nb)
            p_tag.append(tag)

    gface_poly = {}
    for f in np.nonzero(~f_empty)[0]:
        P = gpts[faces[f]]
        if not f_full[f]:
            rel = np.nonzero(f_out[f].any(axis=0))[0]
            P = _clip_all(P, [(pn[m], pb[m]) for m in rel], eps)
        if len(P) >= 3:
            gface_poly[f] = P

    # lateral facet pieces inside every cut cube
    cut = np.nonzero(~c_full & ~c_empty)[0]
    for c in cut:
        lo = gpts[corners[c, 0]]
        hi = gpts[corners[c, 7]]
        rel = np.nonzero((cval[c] > eps).any(axis=0))[0]
        for m in rel:
            P = _plane_polygon(pn[m], pb[m], lo, hi)
            others = [(pn[q], pb[q]) for q in rel if q != m]
            P = _clip_all(P, others, eps)
            add(P, int(c), -1, "lateral")

    z = gpts[faces[:, 0], 2]
    for f, P in gface_poly.items():
        o, nb = int(owner[f]), int(neighbor[f])
        o_ok = not c_empty[o]
        n_ok = nb >= 0 and not c_empty[nb]
        if o_ok and n_ok:
            add(P, o, nb, "")
        elif o_ok or n_ok:
            zz = P[:, 2]
            if nb < 0 and np.all(zz == 0.0):
                tag = "bottom"
            elif nb < 0 and np.all(zz == 1.0):
                tag = "top"
            else:
                raise MeshError(f"grid face {f} at z={z[f]:.3f} has one empty side")
            if o_ok:
                add(P, o, -1, tag)
            else:
                add(P[::-1], nb, -1, tag)

    mesh = _assemble(polys, p_owner, p_neigh, p_tag, h)
    mesh = _merge_small_cells(mesh, MERGE_FRACTION * h**3)
    mesh.metadata.update(
        {
            "generator": "cone",
            "N": N,
            "dim": 3,
            "n_facets": M,
            # cross-sections keep the disc area, so the volume is exact
            "domain_measure": frustum_volume(),
            "analytic_volume": frustum_volume(),
        }
    )
    bad = np.nonzero(mesh.cone_dist <= 0)[0]
    if len(bad):
        cells = np.unique(mesh.cone_cell[bad])
        raise MeshError(f"cut cells {cells[:10].tolist()} are not star-shaped w.r.t. their centroid")
    return mesh


def _assemble(polys, owner, neigh, tags, h):
    allp = np.concatenate(polys)
    tree = cKDTree(allp)
    pairs = tree.query_pairs(1e-10 * h, output_type="ndarray")
    n = len(allp)
    adj = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, label = connected_components(adj, directed=False)
    # representative = first occurrence of each cluster
    _, roots = np.unique(label, return_index=True)
    points = allp[roots]
    lists, keep = [], []
    off = 0
    for f, P in enumerate(polys):
        ids = label[off : off + len(P)]
        off += len(P)
        dedup = [int(v) for i, v in enumerate(ids) if v != ids[i - 1]]
        if len(dedup) >= 3:
            lists.append(dedup)
            keep.append(f)
    keep = np.array(keep)
    owner = np.asarray(owner)[keep]
    neigh = np.asarray(neigh)[keep]
    tags = np.asarray(tags, dtype=object)[keep]
    _, ren = np.unique(np.concatenate([owner, neigh[neigh >= 0]]), return_inverse=True)
    new_owner = ren[: len(owner)]
    new_neigh = np.full(len(neigh), -1)
    new_neigh[neigh >= 0] = ren[len(owner) :]
    used, vmap = np.unique(np.concatenate(lists), return_inverse=True)
    off = 0
    for i, L in enumerate(lists):
        lists[i] = vmap[off : off + len(L)].tolist()
        off += len(L)
    return Mesh(points[used], lists, new_owner, new_neigh, face_tags=tags, metadata={})


def _merge_small_cells(mesh: Mesh, vmin: float, max_passes: int = 20) -> Mesh:
    """Merge cells with volume below ``vmin`` into their best neighbour."""
    merged_total = 0
    for _ in range(max_passes):
        small = np.nonzero(mesh.cell_volume < vmin)[0]
        if len(small) == 0:
            break
        inner = mesh.interior_faces
        o, nb = mesh.face_owner[inner], mesh.face_neighbor[inner]
        a = mesh.face_area[inner]
        shared = sp.coo_matrix(
            (np.r_[a, a], (np.r_[o, nb], np.r_[nb, o])), shape=(mesh.n_cells,) * 2
        ).tocsr()
        label = np.arange(mesh.n_cells)
        touched = np.zeros(mesh.n_cells, dtype=bool)
        for c in small[np.argsort(mesh.cell_volume[small], kind="stable")]:
            if touched[c]:
                continue
            row = shared.getrow(c)
            if row.nnz == 0:
                raise MeshError(f"small cut cell {c} has no interior neighbour")
            # largest shared area, ties to lowest index
            best = row.indices[np.lexsort((row.indices, -row.data))[0]]
            if touched[best]:
                continue
            label[c] = best
            touched[c] = touched[best] = True
            merged_total += 1
        _, label = np.unique(label, return_inverse=True)
        fo = label[mesh.face_owner]
        fn = np.where(mesh.face_neighbor >= 0, label[np.maximum(mesh.face_neighbor, 0)], -1)
        keep = fo != fn
        ptr, idx = mesh.face_ptr, mesh.face_idx
        lists = [idx[ptr[f] : ptr[f + 1]].tolist() for f in np.nonzero(keep)[0]]
        mesh = Mesh(mesh.points, lists, fo[keep], fn[keep], face_tags=mesh.face_tags[keep], metadata=mesh.metadata)
    else:
        raise MeshError("cell merging did not converge")
    mesh.metadata["merged_cells"] = merged_total
    log.debug("merged %d small cut cells", merged_total)
    return mesh
