"""Logically structured mesh families on the unit square / cube."""

from __future__ import annotations

import numpy as np

from .core import Mesh, MeshError, PLANARITY_TOL, planarity_defect

RNG_NAME = "numpy.random.PCG64"


def _check_n(N):
    if int(N) != N or N < 2:
        raise MeshError(f"need at least 2 cells per direction, got N={N}")
    return int(N)


def _structured_topology(shape):
    """Faces of a logically structured grid with ``shape`` cells per direction.

    Returns (faces, owner, neighbor, tags) with faces as an (nf, 2 or 4)
    vertex index array oriented outward from the owner.  Vertex ``(i, j, k)``
    has index ``i + (nx+1)*(j + (ny+1)*k)`` and cell ``(i, j, k)`` has index
    ``i + nx*(j + ny*k)`` (x varies fastest).
    """
    dim = len(shape)
    n = np.array(shape)
    vshape = n + 1

    def vid(*ijk):
        out = ijk[0]
        stride = vshape[0]
        for a, s in zip(ijk[1:], vshape[1:]):
            out = out + stride * a
            stride *= s
        return out

    def cid(*ijk):
        out = ijk[0]
        stride = n[0]
        for a, s in zip(ijk[1:], n[1:]):
            out = out + stride * a
            stride *= s
        return out

    names = "xyz"
    faces, owners, neighbors, tags = [], [], [], []
    for axis in range(dim):
        rng = [np.arange(n[a] + 1) if a == axis else np.arange(n[a]) for a in range(dim)]
        grid = np.meshgrid(*rng, indexing="ij")
        # iterate with x fastest for reproducible ordering
        idx = [g.transpose(*reversed(range(dim))).ravel() for g in grid]
        pos = idx[axis]
        e = [np.eye(dim, dtype=int)[a] for a in range(dim)]
        if dim == 2:
            if axis == 0:
                quad = [vid(idx[0], idx[1]), vid(idx[0], idx[1] + 1)]
            else:
                quad = [vid(idx[0] + 1, idx[1]), vid(idx[0], idx[1])]
        else:
            t1, t2 = [(a, b) for a, b in [(1, 2), (2, 0), (0, 1)]][axis]

            def shifted(da, db):
                s = [idx[0].copy(), idx[1].copy(), idx[2].copy()]
                s[t1] = s[t1] + da
                s[t2] = s[t2] + db
                return vid(*s)

            quad = [shifted(0, 0), shifted(1, 0), shifted(1, 1), shifted(0, 1)]
        quad = np.stack(quad, axis=1)
        left = [c.copy() for c in idx]
        left[axis] = left[axis] - 1
        right = idx
        lo = pos == 0
        hi = pos == n[axis]
        owner = np.where(lo, cid(*right), cid(*[np.maximum(c, 0) for c in left]))
        neighbor = np.where(lo | hi, -1, cid(*[np.minimum(c, n[a] - 1) for a, c in enumerate(right)]))
        quad[lo] = quad[lo, ::-1]
        tag = np.where(lo, names[axis] + "min", np.where(hi, names[axis] + "max", ""))
        faces.append(quad)
        owners.append(owner)
        neighbors.append(neighbor)
        tags.append(tag)
        del e
    return (
        np.concatenate(faces),
        np.concatenate(owners),
        np.concatenate(neighbors),
        np.concatenate(tags).astype(object),
    )


def _grid_points(coords):
    """Vertex array for a tensor grid, x fastest."""
    grid = np.meshgrid(*coords, indexing="ij")
    return np.stack([g.transpose(*reversed(range(len(coords)))).ravel() for g in grid], axis=1)


def _face_lists(faces: np.ndarray):
    k = faces.shape[1]
    ptr = np.arange(0, k * len(faces) + 1, k, dtype=np.int64)
    return ptr, faces.ravel().astype(np.int64)


def structured_mesh(points, shape, cell_centers=None, metadata=None) -> Mesh:
    faces, owner, neighbor, tags = _structured_topology(shape)
    return Mesh(
        points,
        _face_lists(faces),
        owner,
        neighbor,
        cell_centers=cell_centers,
        face_tags=tags,
        metadata=metadata,
    )


def build_rectilinear(*coords, metadata=None) -> Mesh:
    """Orthogonal grid from 1D vertex abscissae per direction."""
    coords = [np.asarray(c, dtype=float) for c in coords]
    shape = tuple(len(c) - 1 for c in coords)
    meta = {"generator": "rectilinear", "dim": len(coords)}
    meta["domain_measure"] = float(np.prod([c[-1] - c[0] for c in coords]))
    meta.update(metadata or {})
    return structured_mesh(_grid_points(coords), shape, metadata=meta)


def build_uniform_box(N: int, d: int = 3) -> Mesh:
    """``N**d`` congruent cells on the unit box."""
    N = _check_n(N)
    x = np.linspace(0.0, 1.0, N + 1)
    return build_rectilinear(*([x] * d), metadata={"generator": "uniform", "N": N})


def gauss_lobatto_abscissae(N: int) -> np.ndarray:
    m = np.arange(N + 1)
    x = 0.5 * (1.0 - np.cos(np.pi * m / N))
    x[0], x[-1] = 0.0, 1.0
    return x


def build_gauss_lobatto_box(N: int, d: int = 3) -> Mesh:
    """Cosine-graded orthogonal grid (vertices at Gauss-Lobatto points)."""
    N = _check_n(N)
    x = gauss_lobatto_abscissae(N)
    return build_rectilinear(*([x] * d), metadata={"generator": "gauss_lobatto", "N": N})


def smooth_mapping_points(N: int) -> np.ndarray:
    """Vertices of the smoothly mapped hexahedral grid, x fastest."""
    i, j, k = (np.arange(N + 1),) * 3
    I, J, K = np.meshgrid(i, j, k, indexing="ij")
    wave = 0.1 * np.sin(2 * np.pi * J / N) * np.sin(2 * np.pi * K / N)
    X = 1.0 - np.cos(np.pi * I / (2 * N))
    Y = J / N + wave
    Z = K / N + wave
    return np.stack([a.transpose(2, 1, 0).ravel() for a in (X, Y, Z)], axis=1)


def build_smooth_mapped(N: int) -> Mesh:
    """Hexahedra with planar faces from a smooth map of the uniform cube grid."""
    N = _check_n(N)
    pts = smooth_mapping_points(N)
    mesh = structured_mesh(
        pts, (N, N, N), metadata={"generator": "smooth", "N": N, "dim": 3, "domain_measure": 1.0}
    )
    defect = planarity_defect(mesh.points, mesh.face_ptr, mesh.face_idx)
    rel = defect / mesh.cell_diameter[mesh.face_owner]
    if rel.max() > PLANARITY_TOL:
        raise MeshError(f"smooth mapping produced a non-planar face (defect {rel.max():.2e})")
    return mesh


def _tri_heights(points, tris, x, sign):
    """Signed distance of ``x`` behind each triangle (rows of vertex ids)."""
    P = points[tris]
    nrm = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    nn = np.linalg.norm(nrm, axis=1)
    g = P.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = sign * np.einsum("ij,ij->i", g - x, nrm) / nn
    return np.where(nn > 0, h, -np.inf)


def _triangulate(mesh: Mesh, which):
    """Split the selected quadrilaterals into two triangles each.

    Each quad is cut along the diagonal that keeps the collocation points of
    both adjacent cells farthest in front of the new triangles; exact ties go
    to the diagonal through the lowest-index vertex.  Returns the new face CSR
    arrays plus the map new face -> old face.
    """
    which = np.asarray(which, dtype=np.int64)
    counts = np.diff(mesh.face_ptr)
    if np.any(counts[which] != 4):
        raise MeshError("only non-planar quadrilaterals can be split")
    Q = mesh.face_idx[mesh.face_ptr[which][:, None] + np.arange(4)]
    low = np.argmin(Q, axis=1)
    rows = np.arange(len(Q))[:, None]
    opts = []
    for shift in (0, 1):
        R = Q[rows, (low[:, None] + shift + np.arange(4)) % 4]
        opts.append((R[:, [0, 1, 2]], R[:, [0, 2, 3]]))
    own = mesh.cell_center[mesh.face_owner[which]]
    nb = mesh.face_neighbor[which]
    nbx = mesh.cell_center[np.maximum(nb, 0)]
    score = []
    for t1, t2 in opts:
        h = [_tri_heights(mesh.points, t, own, 1.0) for t in (t1, t2)]
        hn = [np.where(nb >= 0, _tri_heights(mesh.points, t, nbx, -1.0), np.inf) for t in (t1, t2)]
        score.append(np.minimum.reduce(h + hn))
    pick = score[1] > score[0] * (1 + 1e-12) + 1e-300
    t1 = np.where(pick[:, None], opts[1][0], opts[0][0])
    t2 = np.where(pick[:, None], opts[1][1], opts[0][1])

    counts_all = np.diff(mesh.face_ptr)
    keep = np.ones(mesh.n_faces, dtype=bool)
    keep[which] = False
    kept = np.nonzero(keep)[0]
    # blocks: kept polygons, first triangles, second triangles
    block_idx = np.concatenate([mesh.face_idx[np.repeat(keep, counts_all)], t1.ravel(), t2.ravel()])
    block_size = np.concatenate([counts_all[kept], np.full(2 * len(which), 3)])
    block_start = np.concatenate([[0], np.cumsum(block_size)[:-1]])
    origin = np.concatenate([kept, which, which])
    sub = np.concatenate([np.zeros(len(kept) + len(which), int), np.ones(len(which), int)])
    order = np.lexsort((sub, origin))
    sizes = block_size[order]
    ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=ptr[1:])
    pos = np.repeat(block_start[order] - ptr[:-1], sizes) + np.arange(ptr[-1])
    idx = block_idx[pos].astype(np.int64)
    origin = origin[order]
    return ptr, idx, origin


def split_nonplanar_faces(mesh: Mesh, planarity_tol: float = PLANARITY_TOL) -> Mesh:
    """Replace every non-planar polygon by planar triangles.

    The split is made once per face, so both adjacent cells see the same
    triangles and the mesh stays conforming.
    """
    if mesh.dim == 2:
        return mesh
    defect = planarity_defect(mesh.points, mesh.face_ptr, mesh.face_idx)
    rel = defect / mesh.cell_diameter[mesh.face_owner]
    which = np.nonzero(rel > planarity_tol)[0]
    if len(which) == 0:
        return mesh
    ptr, idx, origin = _triangulate(mesh, which)
    meta = dict(mesh.metadata)
    meta["split_faces"] = int(len(which))
    try:
        return Mesh(
            mesh.points,
            (ptr, idx),
            mesh.face_owner[origin],
            mesh.face_neighbor[origin],
            cell_centers=mesh.cell_center,
            face_tags=mesh.face_tags[origin],
            metadata=meta,
        )
    except MeshError as exc:
        raise MeshError(f"degenerate triangle while splitting faces: {exc}") from exc


def _perturbation_bounds(coords, amplitude):
    """Per-direction max displacement of every vertex (0 on the boundary)."""
    out = []
    for c in coords:
        h = np.diff(c)
        local = np.minimum(np.r_[h[0], h], np.r_[h, h[-1]])
        local = amplitude * local
        local[0] = local[-1] = 0.0
        out.append(local)
    grids = np.meshgrid(*out, indexing="ij")
    dim = len(coords)
    bounds = np.zeros((np.prod([len(c) for c in coords]), dim))
    for a in range(dim):
        bounds[:, a] = grids[a].transpose(*reversed(range(dim))).ravel()
    return bounds


def build_random_perturbed(
    N: int,
    amplitude: float = 0.45,
    seed: int = 0,
    d: int = 3,
    base: str = "uniform",
    max_retries: int = 100,
) -> Mesh:
    """Randomly shaken tensor grid; collocation points stay at the unperturbed centers.

    Interior vertices move by at most ``amplitude`` times the local cell size
    in each direction; boundary vertices only move within their boundary
    facet (corners are fixed) so the domain is preserved.  Vertices of faces
    whose cones would lose positivity are re-drawn.  The returned mesh still
    contains the non-planar quadrilaterals; see :func:`split_nonplanar_faces`.
    """
    N = _check_n(N)
    if not 0.0 <= amplitude < 0.5:
        raise MeshError("amplitude must lie in [0, 0.5)")
    if base == "uniform":
        x = np.linspace(0.0, 1.0, N + 1)
    elif base == "gauss_lobatto":
        x = gauss_lobatto_abscissae(N)
    else:
        raise MeshError(f"unknown base grid {base!r}")
    coords = [x] * d
    shape = (N,) * d
    base_mesh = structured_mesh(_grid_points(coords), shape)
    centers = base_mesh.cell_center.copy()
    pts0 = base_mesh.points
    bounds = _perturbation_bounds(coords, amplitude)
    rng = np.random.Generator(np.random.PCG64(seed))
    disp = rng.uniform(-1.0, 1.0, size=pts0.shape) * bounds
    meta = {
        "generator": "random",
        "base": base,
        "N": N,
        "dim": d,
        "amplitude": amplitude,
        "seed": seed,
        "rng": RNG_NAME,
        "domain_measure": 1.0,
    }
    faces, owner, neighbor, tags = _structured_topology(shape)
    fl = _face_lists(faces)
    for attempt in range(max_retries + 1):
        pts = pts0 + disp
        try:
            mesh = Mesh(pts, fl, owner, neighbor, cell_centers=centers, face_tags=tags, metadata=meta)
            check = split_nonplanar_faces(mesh) if d == 3 else mesh
            bad_cones = np.nonzero(check.cone_dist <= 0)[0]
            bad_cells = np.unique(check.cone_cell[bad_cones])
        except MeshError:
            mesh = None
            bad_cells = np.arange(base_mesh.n_cells)
        if len(bad_cells) == 0:
            mesh.metadata["redraws"] = attempt
            return mesh
        if attempt == max_retries:
            break
        fv = base_mesh.face_vertex_matrix()
        cf = base_mesh.cell_face_matrix()
        verts = np.unique((abs(cf[bad_cells]) @ fv).indices)
        disp[verts] = rng.uniform(-1.0, 1.0, size=(len(verts), d)) * bounds[verts]
    raise MeshError(f"random perturbation failed after {max_retries} redraws")
