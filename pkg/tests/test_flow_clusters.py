import numpy as np
import pytest
import scipy.sparse.linalg as spla

from conftest import ALL_SMALL, small_bary, small_mesh
from polyfv.mesh import build_rectilinear, build_uniform_box
from polyfv.operators import (
    build_clusters,
    build_flow_operators,
    cell_divergence,
    mass_flux,
    pressure_gradient,
    transport_centered,
    transport_upwind,
)
from polyfv.spaces import DiscreteField, build_barycentric_map

RNG = np.random.default_rng(2024)
H = 0.2


def grid2d():
    m = build_uniform_box(5, 2)
    return m, build_barycentric_map(m)


def face_between(m, K, L):
    for f in m.cell_faces(K):
        if {m.face_owner[f], m.face_neighbor[f]} == {K, L}:
            return int(f)
    raise AssertionError


def balanced_flux(ops):
    """Random interior flux with zero balance in every cell."""
    phi = RNG.standard_normal(ops.inc.shape[1])
    L = (ops.inc @ ops.inc.T).tocsc()
    y = spla.lsqr(L, ops.inc @ phi, atol=1e-15, btol=1e-15)[0]
    return phi - ops.inc.T @ y


# -- divergence and pressure gradient ----------------------------------------


def test_divergence_uniform_centered_difference():
    m, b = grid2d()
    ops = build_flow_operators(b)
    u = RNG.standard_normal((m.n_cells, 2))
    U1, U2 = u[:, 0].reshape(5, 5), u[:, 1].reshape(5, 5)
    K = 2 + 5 * 2
    expect = (U1[2, 3] - U1[2, 1]) / (2 * H) + (U2[3, 2] - U2[1, 2]) / (2 * H)
    assert cell_divergence(ops, u, K) == pytest.approx(expect, rel=1e-12)
    # boundary face value is zero for X^D_0 velocities
    K0 = 2  # bottom row
    expect0 = (U1[0, 3] - U1[0, 1]) / (2 * H) + (U2[1, 2] + U2[0, 2]) / (2 * H)
    assert cell_divergence(ops, u, K0) == pytest.approx(expect0, rel=1e-12)


def test_divergence_rejects_nonzero_boundary():
    m, b = grid2d()
    ops = build_flow_operators(b)
    v = DiscreteField(b, np.zeros((m.n_cells, 2)), np.ones((len(m.boundary_faces), 2)))
    with pytest.raises(ValueError):
        cell_divergence(ops, v, 0)


def test_pressure_gradient_uniform_centered_difference():
    m, b = grid2d()
    ops = build_flow_operators(b)
    p = RNG.standard_normal(m.n_cells)
    P = p.reshape(5, 5)
    K = 2 + 5 * 2
    np.testing.assert_allclose(
        pressure_gradient(ops, p, K), [(P[2, 3] - P[2, 1]) / (2 * H), (P[3, 2] - P[1, 2]) / (2 * H)], rtol=1e-12
    )


@pytest.mark.parametrize("name", ALL_SMALL)
def test_divergence_gradient_duality(name):
    m, b = small_mesh(name), small_bary(name)
    ops = build_flow_operators(b)
    vol = m.cell_volume
    for _ in range(20):
        p = RNG.standard_normal(m.n_cells)
        v = RNG.standard_normal((m.n_cells, m.dim))
        lhs = vol[:, None] * ops.pressure_gradient(p) * v
        rhs = vol * p * ops.divergence(v)
        scale = np.abs(lhs).sum() + np.abs(rhs).sum()
        assert abs(lhs.sum() + rhs.sum()) <= 1e-13 * scale


# -- mass flux ------------------------------------------------------------------


def test_mass_flux_uniform_formula_and_antisymmetry():
    m, b = grid2d()
    lam = 0.37
    ops = build_flow_operators(b, lam)
    u = RNG.standard_normal((m.n_cells, 2))
    p = RNG.standard_normal(m.n_cells)
    K = 2 + 5 * 2
    W = K - 1
    f = face_between(m, K, W)
    expect = H * (-(u[K, 0] + u[W, 0]) / 2 + lam * (p[K] - p[W]))
    assert mass_flux(ops, u, p, K, f) == pytest.approx(expect, rel=1e-12)
    assert mass_flux(ops, u, p, W, f) == pytest.approx(-expect, rel=1e-12)
    with pytest.raises(ValueError):
        mass_flux(ops, u, p, K + 5, f)
    with pytest.raises(ValueError):
        mass_flux(ops, u, p, K, int(m.boundary_faces[0]))


@pytest.mark.parametrize("name", ALL_SMALL)
def test_mass_flux_conservative(name):
    m, b = small_mesh(name), small_bary(name)
    ops = build_flow_operators(b, 0.5)
    u = RNG.standard_normal((m.n_cells, m.dim))
    p = RNG.standard_normal(m.n_cells)
    mb = ops.mass_balance(u, p)
    assert abs(mb.sum()) <= 1e-12 * np.abs(mb).sum()
    # without stabilization the balance is m_K div_K u
    ops0 = build_flow_operators(b, 0.0)
    np.testing.assert_allclose(ops0.mass_balance(u, p), m.cell_volume * ops0.divergence(u), atol=1e-14)


def test_negative_lambda_rejected():
    _, b = grid2d()
    with pytest.raises(ValueError):
        build_flow_operators(b, -1.0)


# -- transport ------------------------------------------------------------------


@pytest.mark.parametrize("name", ALL_SMALL)
def test_transport_of_constant(name):
    m, b = small_mesh(name), small_bary(name)
    ops = build_flow_operators(b, 0.2)
    u = RNG.standard_normal((m.n_cells, m.dim))
    p = RNG.standard_normal(m.n_cells)
    w = np.full(m.n_cells, 3.0)
    phi = ops.mass_flux(u, p)
    np.testing.assert_allclose(ops.transport(w, phi, "centered"), 0.0, atol=1e-13)
    np.testing.assert_allclose(ops.transport(w, phi, "upwind"), 3.0 * ops.mass_balance(u, p), atol=1e-13)


@pytest.mark.parametrize("name", ALL_SMALL)
def test_transport_skew_identity(name):
    m, b = small_mesh(name), small_bary(name)
    ops = build_flow_operators(b)
    w = RNG.standard_normal(m.n_cells)
    phi = RNG.standard_normal(ops.inc.shape[1])
    t = ops.transport(w, phi, "centered")
    # sum_K w_K t_K = -1/2 sum_K w_K^2 (mass balance)_K
    assert w @ t == pytest.approx(-0.5 * (w**2) @ (ops.inc @ phi), rel=1e-11, abs=1e-12)
    phi0 = balanced_flux(ops)
    assert np.abs(ops.inc @ phi0).max() < 1e-12
    t0 = ops.transport(w, phi0, "centered")
    assert abs(w @ t0) <= 1e-12 * np.abs(w * t0).sum()
    np.testing.assert_allclose(t0, ops.transport_sum_form(w, phi0), atol=1e-12)


def test_transport_pointwise_helpers():
    m, b = grid2d()
    ops = build_flow_operators(b, 0.1)
    u = RNG.standard_normal((m.n_cells, 2))
    p = RNG.standard_normal(m.n_cells)
    w = RNG.standard_normal(m.n_cells)
    phi = ops.mass_flux(u, p)
    K = 7
    assert transport_centered(ops, w, u, p, K) == pytest.approx(ops.transport(w, phi)[K] / m.cell_volume[K])
    assert transport_upwind(ops, w, u, p, K) == pytest.approx(ops.transport(w, phi, "upwind")[K] / m.cell_volume[K])
    with pytest.raises(ValueError):
        ops.transport(w, phi, "downwind")


def test_upwind_takes_donor_value():
    m = build_rectilinear(np.linspace(0, 1, 4), [0.0, 1.0])
    ops = build_flow_operators(build_barycentric_map(m))
    # uniform flux to the right through the two interior faces
    phi = np.array([2.0, 2.0]) * np.where(m.face_owner[m.interior_faces] < m.face_neighbor[m.interior_faces], 1, -1)
    w = np.array([1.0, 4.0, 9.0])
    t = ops.transport(w, phi, "upwind")
    np.testing.assert_allclose(t, [2 * 1.0, 2 * 4.0 - 2 * 1.0, -2 * 4.0])
    tc = ops.transport(w, phi, "centered")
    np.testing.assert_allclose(tc, [0.5 * 2 * 3, 0.5 * 2 * (5 + 3), 0.5 * 2 * 5])


@pytest.mark.parametrize("mode", ["centered", "upwind"])
def test_transport_jacobians_match_finite_differences(mode):
    b = small_bary("random2d")
    m = b.mesh
    ops = build_flow_operators(b)
    w = RNG.standard_normal(m.n_cells)
    phi = RNG.choice([-1.0, 1.0], ops.inc.shape[1]) * (0.5 + np.abs(RNG.standard_normal(ops.inc.shape[1])))
    dw, dphi = ops.transport_jacobians(w, phi, mode)
    t0 = ops.transport(w, phi, mode)
    for _ in range(5):
        # linear in w; piecewise linear in phi while no flux changes sign
        a = RNG.standard_normal(m.n_cells)
        c = RNG.uniform(-0.4, 0.4, len(phi))
        np.testing.assert_allclose(dw @ a, ops.transport(w + a, phi, mode) - t0, atol=1e-12)
        np.testing.assert_allclose(dphi @ c, ops.transport(w, phi + c, mode) - t0, atol=1e-12)


# -- clusters -------------------------------------------------------------------


def test_strip_hand_executed():
    m = build_rectilinear(np.linspace(0, 1, 6), [0.0, 0.2])
    part = build_clusters(m)
    # step 1: cell 0 opens {0,1}; cell 2 touches 1; cell 3 opens {2,3,4}
    assert part.assignment.tolist() == [0, 0, 1, 1, 1]
    assert part.isolated.size == 0


def test_structured_grid_isolated_cells_absorbed():
    m = build_uniform_box(5, 2)
    part = build_clusters(m)
    assert part.isolated.size > 0
    assert np.all(part.assignment >= 0)
    assert part.sizes().min() >= 2


@pytest.mark.parametrize("name", ALL_SMALL)
def test_clusters_partition_without_singletons(name):
    m = small_mesh(name)
    part = build_clusters(m)
    assert np.all(part.assignment >= 0)
    assert part.sizes().min() >= 2
    assert part.sizes().sum() == m.n_cells


def test_lambda_only_inside_clusters():
    m = small_mesh("random3d")
    part = build_clusters(m)
    lam = part.lambda_map(0.25)
    inner = m.interior_faces
    same = part.assignment[m.face_owner[inner]] == part.assignment[m.face_neighbor[inner]]
    assert np.all(lam[same] == 0.25) and np.all(lam[~same] == 0.0)
    assert same.any() and (~same).any()
    with pytest.raises(ValueError):
        part.lambda_map(-1.0)
