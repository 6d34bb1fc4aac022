import numpy as np
import pytest

from conftest import small_mesh
from polyfv.mesh import (
    Mesh,
    MeshError,
    build_gauss_lobatto_box,
    build_random_perturbed,
    build_smooth_mapped,
    build_truncated_cone,
    build_uniform_box,
    frustum_volume,
    gauss_lobatto_abscissae,
    mesh_summary,
    split_nonplanar_faces,
    validate,
    write_mesh_sidecar,
    write_vtk,
)
from polyfv.mesh.core import planarity_defect


def test_uniform_box_geometry():
    m = build_uniform_box(4, 3)
    assert m.n_cells == 64
    np.testing.assert_allclose(m.cell_volume, 1 / 64, rtol=1e-14)
    assert m.n_faces == 3 * 4 * 4 * 5
    assert len(m.boundary_faces) == 6 * 16
    # x fastest ordering
    np.testing.assert_allclose(m.cell_center[1] - m.cell_center[0], [0.25, 0, 0])
    np.testing.assert_allclose(m.cell_center[4] - m.cell_center[0], [0, 0.25, 0])
    assert sorted(m.boundary_tags) == ["xmax", "xmin", "ymax", "ymin", "zmax", "zmin"]
    assert np.isclose(m.max_diameter, np.sqrt(3) / 4)


def test_uniform_2d_cone_heights():
    m = build_uniform_box(5, 2)
    np.testing.assert_allclose(m.cone_dist, 0.1, rtol=1e-14)
    np.testing.assert_allclose(m.cone_measure, 0.2 * 0.1 / 2)


def test_normals_point_out_of_owner():
    for name in ["uniform3d", "random3d", "cone", "random2d"]:
        m = small_mesh(name)
        d = np.einsum("ij,ij->i", m.face_center - m.cell_center[m.face_owner], m.face_normal)
        assert np.all(d > 0)


@pytest.mark.parametrize("name", ["uniform2d", "random2d", "uniform3d", "gauss_lobatto3d", "smooth", "random3d", "cone"])
def test_all_families_validate(name):
    rep = validate(small_mesh(name))
    assert rep.passed, str(rep)
    assert rep.checks["tensor_identity"].value <= 1e-12


def test_gauss_lobatto_points():
    x = gauss_lobatto_abscissae(4)
    np.testing.assert_allclose(x, 0.5 * (1 - np.cos(np.pi * np.arange(5) / 4)), atol=1e-15)
    m = build_gauss_lobatto_box(4, 2)
    assert np.isclose(m.cell_volume.sum(), 1.0)
    assert m.cell_volume.min() < m.cell_volume.max() / 4  # graded towards the walls


def test_smooth_mapped_planar_and_unit_volume():
    m = build_smooth_mapped(4)
    assert np.isclose(m.cell_volume.sum(), 1.0, rtol=1e-12)
    defect = planarity_defect(m.points, m.face_ptr, m.face_idx)
    assert defect.max() < 1e-12


def test_random_mesh_reproducible_and_seed_sensitive():
    a = build_random_perturbed(4, 0.45, seed=7)
    b = build_random_perturbed(4, 0.45, seed=7)
    c = build_random_perturbed(4, 0.45, seed=8)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.metadata["seed"] == 7 and a.metadata["rng"]


def test_random_mesh_keeps_domain_and_centers():
    m = build_random_perturbed(4, 0.45, seed=1)
    base = build_uniform_box(4, 3)
    np.testing.assert_allclose(m.cell_center, base.cell_center)
    assert m.points.min() >= 0 and m.points.max() <= 1
    disp = np.abs(m.points - base.points)
    assert disp.max() <= 0.45 / 4 + 1e-15


def test_random_mesh_amplitude_validation():
    with pytest.raises(MeshError):
        build_random_perturbed(4, 0.5)


def test_face_splitting_gives_planar_conforming_mesh():
    raw = build_random_perturbed(4, 0.45, seed=0)
    assert planarity_defect(raw.points, raw.face_ptr, raw.face_idx).max() > 1e-6
    m = split_nonplanar_faces(raw)
    assert m.metadata["split_faces"] > 0
    assert validate(m).passed
    np.testing.assert_allclose(m.cell_volume.sum(), 1.0, rtol=1e-12)
    # planar faces are untouched
    assert split_nonplanar_faces(build_uniform_box(3, 3)).n_faces == build_uniform_box(3, 3).n_faces


def test_cone_volume_and_tags():
    m = small_mesh("cone")
    assert abs(m.cell_volume.sum() - frustum_volume()) < 1e-13
    assert set(m.boundary_tags) == {"bottom", "top", "lateral"}
    bottom = m.faces_with_tag("bottom")
    np.testing.assert_allclose(m.face_center[bottom][:, 2], 0.0, atol=1e-14)
    assert m.cell_volume.min() >= 0.1 / 6**3 * (1 - 1e-12)


def test_cone_small_n_rejected():
    with pytest.raises(MeshError):
        build_truncated_cone(2)


def test_mesh_rejects_inconsistent_arrays():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    with pytest.raises(MeshError):
        Mesh(pts, [[0, 1], [1, 2], [2, 3], [3, 0]], [0, 0, 0], [-1, -1, -1, -1])


def test_vtk_export_roundtrip(tmp_path):
    m = small_mesh("random3d")
    path = write_vtk(m, tmp_path / "m.vtk", {"k": np.arange(m.n_cells), "v": m.cell_center}, title="t hash=abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 4.2"
    assert lines[1] == "t hash=abc"
    types = lines[lines.index(f"CELL_TYPES {m.n_cells}") + 1 :][: m.n_cells]
    assert set(types) == {"42"}
    assert f"CELL_DATA {m.n_cells}" in lines
    with pytest.raises(ValueError):
        write_vtk(m, tmp_path / "bad.vtk", {"k": np.arange(3)})


def test_vtk_2d_polygons_counterclockwise(tmp_path):
    m = build_uniform_box(2, 2)
    lines = write_vtk(m, tmp_path / "m.vtk").read_text().splitlines()
    start = lines.index(f"CELLS {m.n_cells} {5 * m.n_cells}") + 1
    ids = [int(v) for v in lines[start].split()[1:]]
    p = m.points[ids]
    area = 0.5 * np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1])
    assert area > 0


def test_mesh_sidecar(tmp_path):
    m = small_mesh("uniform3d")
    path = write_mesh_sidecar(m, tmp_path / "m.json", {"config_hash": "x"})
    import json

    doc = json.loads(path.read_text())
    assert doc["config_hash"] == "x" and doc["n_cells"] == 64 and doc["quality"]["passed"]
    assert mesh_summary(m)["volume"] == pytest.approx(1.0)
