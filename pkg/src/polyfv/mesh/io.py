"""Mesh and cell-field export: legacy VTK unstructured grid plus a JSON sidecar."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .core import Mesh, MeshError, validate

log = logging.getLogger(__name__)

VTK_POLYGON = 7
VTK_POLYHEDRON = 42


def _polygon_loop(mesh: Mesh, k: int) -> list[int]:
    """Vertices of a 2D cell in counter-clockwise order, chained from its edges."""
    nxt = {}
    for f in mesh.cell_faces(k):
        a, b = mesh.face_vertices(f)
        if mesh.face_owner[f] != k:
            a, b = b, a
        nxt[int(a)] = int(b)
    start = min(nxt)
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise MeshError(f"cell {k} boundary is not a single closed loop")
    # outward normal (dy, -dx) lies right of each edge: the loop is counter-clockwise
    return loop


def _cell_record(mesh: Mesh, k: int) -> tuple[int, list[int]]:
    if mesh.dim == 2:
        loop = _polygon_loop(mesh, k)
        return VTK_POLYGON, [len(loop)] + loop
    stream = []
    faces = mesh.cell_faces(k)
    stream.append(len(faces))
    for f in faces:
        v = mesh.face_vertices(f)
        if mesh.face_owner[f] != k:
            v = v[::-1]
        stream.append(len(v))
        stream.extend(int(i) for i in v)
    return VTK_POLYHEDRON, [len(stream)] + stream


def write_vtk(
    mesh: Mesh,
    path,
    cell_data: dict[str, np.ndarray] | None = None,
    title: str = "polyfv mesh",
) -> Path:
    """Write ``mesh`` and optional per-cell scalar/vector arrays as legacy VTK text.

    3D cells are written as polyhedra (face streams), 2D cells as polygons.
    The title line is truncated to the 255 characters the format allows.
    """
    path = Path(path)
    pts = mesh.points
    if mesh.dim == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
    records = [_cell_record(mesh, k) for k in range(mesh.n_cells)]
    size = sum(len(r) for _, r in records)
    lines = ["# vtk DataFile Version 4.2", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(pts)} double")
    lines.extend(" ".join(repr(float(c)) for c in p) for p in pts)
    lines.append(f"CELLS {mesh.n_cells} {size}")
    lines.extend(" ".join(str(i) for i in r) for _, r in records)
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend(str(t) for t, _ in records)
    if cell_data:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, values in cell_data.items():
            v = np.asarray(values, dtype=float)
            if v.shape[0] != mesh.n_cells:
                raise ValueError(f"cell array {name!r} has {v.shape[0]} rows, mesh has {mesh.n_cells} cells")
            if v.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(x)) for x in v)
            else:
                if v.shape[1] == 2:
                    v = np.column_stack([v, np.zeros(len(v))])
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(repr(float(c)) for c in row) for row in v)
    path.write_text("\n".join(lines) + "\n")
    log.info("wrote %s (%d cells)", path, mesh.n_cells)
    return path


def mesh_summary(mesh: Mesh) -> dict:
    """JSON-ready description of a mesh: generator metadata, sizes and quality."""
    meta = {k: (v.item() if isinstance(v, np.generic) else v) for k, v in mesh.metadata.items()}
    return {
        "metadata": meta,
        "dim": mesh.dim,
        "n_cells": mesh.n_cells,
        "n_faces": mesh.n_faces,
        "n_boundary_faces": int(len(mesh.boundary_faces)),
        "n_vertices": int(len(mesh.points)),
        "h_max": mesh.max_diameter,
        "volume": float(mesh.cell_volume.sum()),
        "boundary_tags": mesh.boundary_tags,
        "quality": validate(mesh).as_dict(),
    }


def write_mesh_sidecar(mesh: Mesh, path, extra: dict | None = None) -> Path:
    path = Path(path)
    doc = mesh_summary(mesh)
    doc.update(extra or {})
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
