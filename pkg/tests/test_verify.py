import numpy as np
import pytest

from conftest import small_bary, small_mesh
from polyfv.mesh import build_gauss_lobatto_box, build_uniform_box
from polyfv.operators import build_gradients
from polyfv.solver import CoupledSystem, SolverState, conduction_guess, newton_solve
from polyfv.verify import (
    MESH_FAMILIES,
    REFERENCE,
    build_mesh,
    cavity_metrics,
    cavity_problem,
    convergence_order,
    error_norms,
    isothermal_ns_case,
    ns_divergence,
    nusselt,
    poisson_trig_case,
    run_manufactured,
    run_study,
    velocity_maxima,
)

RNG = np.random.default_rng(5)


def interior_points(n, d):
    return RNG.uniform(0.05, 0.95, (n, d))


def fd_grad(fn, x, eps=1e-6):
    """Central-difference gradient of a callable returning (n,) or (n, k)."""
    cols = []
    for j in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[j] = eps
        cols.append((fn(x + e) - fn(x - e)) / (2 * eps))
    return np.stack(cols, axis=-1)


# -- manufactured cases --------------------------------------------------------------


def test_poisson_trig_source_value():
    case = poisson_trig_case(3)
    assert case.g(np.array([[0.5, 0.0, 0.0]]))[0] == pytest.approx(3 * np.pi**2, rel=1e-14)
    x = interior_points(20, 3)
    np.testing.assert_allclose(case.g(x), 3 * np.pi**2 * case.T_ref(x), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(case.grad_T(x), fd_grad(case.T_ref, x), atol=1e-7)


@pytest.mark.parametrize("dim", [2, 3])
def test_ns_reference_divergence_free_and_no_slip(dim):
    case = isothermal_ns_case(dim)
    x = interior_points(50, dim)
    np.testing.assert_allclose(ns_divergence(dim)(x), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("nii->n", case.grad_u(x)), 0.0, atol=1e-11)
    m = build_uniform_box(4, dim)
    xb = m.face_center[m.boundary_faces]
    np.testing.assert_allclose(case.u_ref(xb), 0.0, atol=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
def test_ns_gradients_and_source_match_numerical_differentiation(dim):
    Pr = 0.7
    case = isothermal_ns_case(dim, Pr)
    x = interior_points(10, dim)
    gu = case.grad_u(x)
    np.testing.assert_allclose(gu, fd_grad(case.u_ref, x), atol=1e-6 * max(1, np.abs(gu).max()))
    np.testing.assert_allclose(case.grad_p(x), fd_grad(case.p_ref, x), atol=1e-7)
    # f = (u . grad) u + grad p - Pr Laplace u, with the Laplacian by second differences
    h = 1e-4
    lap = np.zeros((len(x), dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        lap += (case.u_ref(x + e) - 2 * case.u_ref(x) + case.u_ref(x - e)) / h**2
    u = case.u_ref(x)
    f = np.einsum("nj,nij->ni", u, gu) + case.grad_p(x) - Pr * lap
    scale = np.abs(case.f(x)).max()
    np.testing.assert_allclose(case.f(x), f, atol=1e-5 * scale)


# -- norms and orders ---------------------------------------------------------------


def test_error_norms_against_independent_formula():
    b = small_bary("random2d")
    m = b.mesh
    grads = build_gradients(b)
    ref = lambda x: np.sin(2 * x[:, 0]) + x[:, 1]  # noqa: E731
    rgrad = lambda x: np.column_stack([2 * np.cos(2 * x[:, 0]), np.ones(len(x))])  # noqa: E731
    xk, vol = m.cell_center, m.cell_volume
    vals = ref(xk) + 0.01 * RNG.standard_normal(m.n_cells)
    bnd = ref(m.face_center[m.boundary_faces])
    e = error_norms(grads, vals, bnd, ref, rgrad)
    r = ref(xk)
    assert e.eps_inf == pytest.approx(np.max(np.abs(vals - r)) / np.max(np.abs(r)), rel=1e-14)
    assert e.eps_2 == pytest.approx(np.sqrt(np.sum(vol * (vals - r) ** 2) / np.sum(vol * r**2)), rel=1e-14)
    from polyfv.operators import cell_gradients

    gd = cell_gradients(grads, np.concatenate([vals, bnd]))
    gr = rgrad(xk)
    expect = np.sqrt(np.sum(vol[:, None] * (gd - gr) ** 2) / np.sum(vol[:, None] * gr**2))
    assert e.eps_h1 == pytest.approx(expect, rel=1e-14)
    twice = error_norms(grads, 2 * r, 2 * bnd, ref)
    assert twice.eps_2 == pytest.approx(1.0) and twice.eps_inf == pytest.approx(1.0)
    assert np.isnan(twice.eps_h1)
    assert set(e.as_dict()) == {"epsinf", "eps2", "epsH1"}
    with pytest.raises(ValueError):
        error_norms(grads, vals, bnd, lambda x: np.zeros(len(x)))


def test_convergence_order_oracles():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    assert convergence_order(h, 3 * h**2) == pytest.approx(2.0, abs=1e-12)
    assert convergence_order(h, 0.5 * h) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        convergence_order(h[:2], h[:2])
    with pytest.raises(ValueError):
        convergence_order(h[:3], np.array([1.0, 0.0, 1.0]))


# -- mesh families and drivers --------------------------------------------------------


def test_build_mesh_families():
    for fam in MESH_FAMILIES:
        m = build_mesh(fam, 4)
        assert m.dim == 3 and m.n_cells > 0
    assert build_mesh("random", 4, dim=2).dim == 2
    with pytest.raises(ValueError):
        build_mesh("cone", 4, dim=2)
    with pytest.raises(ValueError):
        build_mesh("hexagonal", 4)


def test_run_study_requires_three_levels():
    with pytest.raises(ValueError):
        run_study("poisson_trig", "uniform", [4, 8])


def test_small_poisson_study_second_order():
    rep = run_study("poisson_trig", "uniform", [4, 8, 16], dim=2)
    assert rep.slopes[("T", "eps2")] == pytest.approx(2.0, abs=0.15)
    assert len(rep.rows()) == 3
    assert rep.levels[0].N == 4


def test_run_manufactured_metrics():
    m = small_mesh("uniform2d")
    res = run_manufactured(isothermal_ns_case(2), m, lam=1e-8)
    assert set(res.errors) == {"u1", "u2", "p"}
    assert res.metrics["mass_residual"] < 1e-12
    assert abs(res.metrics["mean_pressure"]) < 1e-12


# -- cavity metrics ----------------------------------------------------------------


@pytest.mark.parametrize("mesh", [build_uniform_box(3, 3), build_gauss_lobatto_box(4, 3)])
def test_conduction_nusselt_is_one(mesh):
    sysm = CoupledSystem(mesh, cavity_problem(Ra=0.0))
    st = SolverState(sysm, conduction_guess(sysm), 0.0)
    assert nusselt(st, "xmin") == pytest.approx(1.0, rel=1e-12)
    assert nusselt(st, "xmax") == pytest.approx(1.0, rel=1e-12)
    assert velocity_maxima(st) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        nusselt(st, "ymin")  # adiabatic wall
    with pytest.raises(ValueError):
        nusselt(st, "lateral")


def test_small_cavity_metrics():
    sysm = CoupledSystem(build_uniform_box(4, 3), cavity_problem(Ra=1e4, lam=1e-2))
    met = cavity_metrics(newton_solve(sysm))
    assert met["Nu"] > 1.0
    assert met["heat_balance_rel"] < 1e-8
    assert met["u3_max"] > 0
    assert REFERENCE[20]["Nu"] == 16.380
