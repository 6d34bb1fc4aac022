"""Shared small meshes and operators (cached per session)."""

from __future__ import annotations

import functools

import pytest

from polyfv.mesh import build_random_perturbed, build_smooth_mapped, build_truncated_cone, build_uniform_box
from polyfv.mesh import build_gauss_lobatto_box, split_nonplanar_faces
from polyfv.spaces import build_barycentric_map

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def small_mesh(name: str):
    """Meshes with N <= 8 used by the property tests."""
    if name == "uniform2d":
        return build_uniform_box(5, 2)
    if name == "random2d":
        return build_random_perturbed(6, 0.45, 3, d=2)
    if name == "uniform3d":
        return build_uniform_box(4, 3)
    if name == "gauss_lobatto3d":
        return build_gauss_lobatto_box(4, 3)
    if name == "smooth":
        return build_smooth_mapped(4)
    if name == "random3d":
        return split_nonplanar_faces(build_random_perturbed(4, 0.45, 0))
    if name == "cone":
        return build_truncated_cone(6)
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def small_bary(name: str):
    return build_barycentric_map(small_mesh(name))


ALL_SMALL = ["uniform2d", "random2d", "uniform3d", "gauss_lobatto3d", "smooth", "random3d", "cone"]


@pytest.fixture(params=ALL_SMALL)
def family(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
