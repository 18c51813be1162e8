import numpy as np
import pytest

from koiterflow.errors import FluxCompatibilityError, InvalidParametersError
from koiterflow.fluid import (
    MacGrid,
    StressModel,
    convection_skew,
    divergence,
    mac_divergence,
    mac_gradient,
    p_structure_audit,
    pressure_projection,
    sample_mac,
    stokes_solve,
    stress,
    sym_gradient,
)


def _grid2(n=33):
    x = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return X, Y, (x[1] - x[0],) * 2


# collocated calculus --------------------------------------------------------

def test_rigid_rotation_has_zero_strain():
    X, Y, h = _grid2()
    D = sym_gradient(np.array([-Y, X]), h)
    assert np.max(np.abs(D)) <= 1e-13


def test_pure_strain():
    X, Y, h = _grid2()
    u = np.array([X, -Y])
    D = sym_gradient(u, h)
    assert np.allclose(D[0, 0], 1) and np.allclose(D[1, 1], -1) and np.allclose(D[0, 1], 0)
    assert np.max(np.abs(divergence(u, h))) <= 1e-13


def test_manufactured_divergence_second_order():
    errs = []
    for n in (32, 64):
        x = np.arange(n) * 2 * np.pi / n
        X, Y = np.meshgrid(x, x, indexing="ij")
        u = np.array([np.sin(X) * np.cos(Y), -np.cos(X) * np.sin(Y)])
        errs.append(np.max(np.abs(divergence(u, (x[1],) * 2, (True, True)))))
    # the exact field is solenoidal; the centred stencil cancels to round-off here
    assert max(errs) <= 1e-12


# stress laws ----------------------------------------------------------------

def test_zero_strain_zero_stress():
    for m in (StressModel.newtonian(1.0), StressModel.additive(1, 0.5, 1.5), StressModel.quadratic(1, 0, 3)):
        assert np.all(stress(m, np.zeros((3, 3))) == 0)


def test_additive_p2_is_identity_map(rng):
    A = rng.standard_normal((10, 3, 3))
    D = A + np.swapaxes(A, 1, 2)
    assert np.allclose(stress(StressModel.additive(1.0, 0.5, 2.0), D), D, rtol=0, atol=1e-15)


def test_additive_cubic_value():
    D = np.diag([2.0, 0.0])  # |D| = 2
    assert np.allclose(stress(StressModel.additive(1.0, 0.0, 3.0), D), 2 * D)


def test_stress_rejects_non_symmetric():
    with pytest.raises(ValueError):
        stress(StressModel.newtonian(1.0), np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_invalid_models_rejected():
    with pytest.raises(InvalidParametersError):
        StressModel.additive(1.0, 0.0, 1.0)
    with pytest.raises(InvalidParametersError):
        StressModel.newtonian(0.0)


def test_newtonian_audit_coercivity_constant():
    rep = p_structure_audit(StressModel.newtonian(1.0), n_samples=10_000, seed=1)
    assert rep["monotone_violations"] == 0
    assert rep["c1"] == pytest.approx(2.0, rel=1e-12)
    assert rep["symmetric_ok"] and rep["growth_ok"] and rep["coercivity_ok"]


def test_quadratic_audit_monotone():
    rep = p_structure_audit(StressModel.quadratic(1.0, 1.0, 1.5), n_samples=100_000, seed=2)
    assert rep["monotone_violations"] == 0


def test_adversarial_model_flagged():
    assert p_structure_audit(lambda D: -D, n_samples=500, seed=3)["monotone_violations"] > 0


# skew convection -------------------------------------------------------------

def _periodic(n):
    x = np.arange(n) * 2 * np.pi / n
    return np.meshgrid(x, x, indexing="ij")


def test_skew_convection_cancels_on_diagonal():
    X, Y = _periodic(32)
    v = np.array([np.sin(Y), np.cos(X)])
    u = np.array([np.cos(X + Y), np.sin(2 * X)])
    a1, a2 = convection_skew(v, u, u, (2 * np.pi, 2 * np.pi))
    assert abs(a1 - a2) <= 1e-12 * max(1.0, abs(a1))


def test_skew_convection_zero_advection():
    X, Y = _periodic(16)
    u = np.array([np.cos(X), np.sin(Y)])
    assert convection_skew(np.zeros_like(u), u, u, (2 * np.pi,) * 2) == (0.0, 0.0)


def test_skew_convection_against_refined_quadrature():
    def fields(n):
        X, Y = _periodic(n)
        v = np.array([np.sin(Y) + 0.3, np.cos(X)])
        u = np.array([np.cos(X + Y), np.sin(2 * X) * np.cos(Y)])
        phi = np.array([np.sin(X), np.cos(2 * Y)])
        return v, u, phi

    coarse = convection_skew(*fields(32), (2 * np.pi,) * 2)
    fine = convection_skew(*fields(128), (2 * np.pi,) * 2)
    assert np.allclose(coarse, fine, rtol=0, atol=1e-6)


# MAC projection and Stokes ------------------------------------------------------

def _solenoidal(grid):
    xn = np.arange(grid.nx + 1) * grid.dx
    zn = np.arange(grid.nz + 1) * grid.dz
    X, Z = np.meshgrid(xn, zn, indexing="ij")
    psi = np.sin(np.pi * Z) ** 2 * (np.cos(X) + 0.5 * np.sin(2 * X))
    u = (psi[:-1, 1:] - psi[:-1, :-1]) / grid.dz
    w = -(psi[1:, :] - psi[:-1, :]) / grid.dx
    return u, w


def test_projection_keeps_divergence_free_field():
    grid = MacGrid(32, 16)
    u, w = _solenoidal(grid)
    assert np.max(np.abs(mac_divergence(grid, u, w))) <= 1e-12
    st, phi = pressure_projection(grid, u, w)
    assert np.max(np.abs(st.u - u)) <= 1e-10 and np.max(np.abs(phi)) <= 1e-10


def test_projection_idempotent(rng):
    grid = MacGrid(32, 16)
    u, w = grid.zeros()
    u = rng.standard_normal(u.shape)
    w = rng.standard_normal(w.shape)
    w[:, 0] = w[:, -1] = 0.0
    s1, _ = pressure_projection(grid, u, w)
    s2, _ = pressure_projection(grid, s1.u, s1.w)
    assert max(np.max(np.abs(s2.u - s1.u)), np.max(np.abs(s2.w - s1.w))) <= 1e-12


def test_projection_removes_gradient():
    grid = MacGrid(32, 16)
    Xc, Zc = grid.centers()
    gx, gz = mac_gradient(grid, np.cos(Xc) * np.cos(np.pi * Zc) + Zc**2)
    st, _ = pressure_projection(grid, gx, gz, tol=1e-12)
    assert np.max(np.abs(st.u)) <= 1e-8 and np.max(np.abs(st.w)) <= 1e-8


def test_projection_recovers_solenoidal_part():
    grid = MacGrid(48, 24)
    u, w = _solenoidal(grid)
    Xc, Zc = grid.centers()
    gx, gz = mac_gradient(grid, np.sin(2 * Xc) * Zc**3)
    st, _ = pressure_projection(grid, u + gx, w + gz, tol=1e-10)
    assert np.max(np.abs(st.u - u)) <= 1e-8 and np.max(np.abs(st.w - w)) <= 1e-8
    assert st.div_tol <= 1e-8


def test_stokes_zero_data():
    grid = MacGrid(16, 8)
    st = stokes_solve(grid, np.zeros(16), np.zeros(16))
    assert np.max(np.abs(st.u)) == 0 and np.max(np.abs(st.w)) == 0


def test_stokes_tangential_data():
    grid = MacGrid(32, 16)
    x = np.arange(32) * grid.dx
    st = stokes_solve(grid, np.sin(x), np.zeros(32))
    assert np.max(np.abs(mac_divergence(grid, st.u, st.w))) <= 1e-10
    assert np.sum(st.w[:, -1] - st.w[:, 0]) * grid.dx == 0
    assert np.max(np.abs(st.u)) > 0.1


def test_stokes_net_flux_rejected():
    grid = MacGrid(16, 8)
    with pytest.raises(FluxCompatibilityError) as exc:
        stokes_solve(grid, np.zeros(16), np.full(16, 0.1 / (2 * np.pi)))
    assert exc.value.flux == pytest.approx(0.1)


def test_sample_mac_reproduces_linear_fields():
    grid = MacGrid(16, 8)
    Xu, Zu = grid.u_points()
    Xw, Zw = grid.w_points()
    u = 2.0 + 0.5 * Zu
    w = 1.0 - 0.25 * Zw
    z = np.linspace(0.1, 0.9, 7)
    x = np.full(7, 1.0)
    uu, ww = sample_mac(grid, u, w, x, z)
    assert np.allclose(uu, 2.0 + 0.5 * z) and np.allclose(ww, 1.0 - 0.25 * z)
