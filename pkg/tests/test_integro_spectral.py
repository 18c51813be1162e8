import warnings

import numpy as np
import pytest
from scipy.special import sph_harm_y

from koiterflow.errors import AliasingWarning, SPDViolationError
from koiterflow.integro import (
    IntegroSystem,
    cholesky_or_raise,
    cosh_oracle,
    integro_ode_solve,
    observed_order,
)
from koiterflow.spectral import SphereHarmonics, check_resolution, fourier_derivative, trig_eval


# integro-ODE ---------------------------------------------------------------

def test_trivial_system_constant():
    tr = integro_ode_solve(IntegroSystem(1.0, 0.0, 0.0, 0.0), [1.0], 1.0, 1e-2)
    assert np.all(tr.alpha == 1.0)


def test_cosh_oracle():
    assert cosh_oracle(1e-3, 1.0) <= 1e-6
    errs = [cosh_oracle(dt) for dt in (8e-3, 4e-3, 2e-3, 1e-3)]
    assert np.all(observed_order(errs) >= 1.9)


def test_decay_second_order():
    errs = []
    for dt in (0.02, 0.01, 0.005):
        tr = integro_ode_solve(IntegroSystem(1.0, -1.0, 0.0, 0.0), [1.0], 1.0, dt)
        errs.append(abs(tr.alpha[-1, 0] - np.exp(-1.0)))
    assert np.all(observed_order(errs) >= 1.9)


def test_history_kernel_against_closed_form():
    # a' = int_0^t e^{-(t-s)} a(s) ds, a(0) = 1  <=>  a'' + a' - a = 0, a'(0) = 0
    r1, r2 = (-1 + np.sqrt(5)) / 2, (-1 - np.sqrt(5)) / 2
    c1 = -r2 / (r1 - r2)
    exact = c1 * np.exp(r1) + (1 - c1) * np.exp(r2)
    errs = []
    for dt in (0.02, 0.01):
        sys_ = IntegroSystem(1.0, 0.0, lambda t, s: np.exp(-(t - s)), 0.0)
        errs.append(abs(integro_ode_solve(sys_, [1.0], 1.0, dt).alpha[-1, 0] - exact))
    assert errs[1] <= 1e-4 and errs[0] / errs[1] >= 3.5


def test_callable_constant_memory_matches_array_path():
    T, dt = 0.5, 0.01
    a = integro_ode_solve(IntegroSystem(1.0, 0.0, 1.0, 0.0), [1.0], T, dt).alpha
    b = integro_ode_solve(IntegroSystem(1.0, 0.0, lambda t, s: 1.0, 0.0), [1.0], T, dt).alpha
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_vector_system_with_forcing():
    A = np.diag([1.0, 2.0])
    B = np.array([[0.0, 1.0], [-1.0, 0.0]])
    tr = integro_ode_solve(IntegroSystem(A, B, np.zeros((2, 2)), np.array([1.0, 0.0])), [0.0, 0.0], 0.2, 0.01)
    assert tr.alpha.shape == (21, 2) and np.all(np.isfinite(tr.alpha))
    assert tr.at(0.2)[0] == pytest.approx(0.2, rel=0.05)


def test_negative_mass_raises():
    with pytest.raises(SPDViolationError):
        integro_ode_solve(IntegroSystem(-1.0, 0.0, 0.0, 0.0), [1.0], 0.1, 0.01)
    with pytest.raises(SPDViolationError):
        cholesky_or_raise(np.array([[1.0, 2.0], [0.0, 1.0]]))


# spectral ---------------------------------------------------------------------

def test_fourier_derivative_exact_for_trig():
    x = np.arange(32) * 2 * np.pi / 32
    f = np.sin(3 * x) + np.cos(x)
    assert np.allclose(fourier_derivative(f, 2 * np.pi), 3 * np.cos(3 * x) - np.sin(x), atol=1e-12)
    assert np.allclose(fourier_derivative(f, 2 * np.pi, 2), -9 * np.sin(3 * x) - np.cos(x), atol=1e-11)


def test_trig_eval_between_nodes():
    x = np.arange(16) * 2 * np.pi / 16
    xs = np.array([0.123, 2.5, 6.0])
    assert np.allclose(trig_eval(np.cos(2 * x), 2 * np.pi, xs), np.cos(2 * xs), atol=1e-13)
    assert np.allclose(trig_eval(np.cos(2 * x), 2 * np.pi, xs, 1), -2 * np.sin(2 * xs), atol=1e-12)


def test_aliasing_warning():
    x = np.arange(64) * 2 * np.pi / 64
    with pytest.warns(AliasingWarning):
        check_resolution(np.cos(30 * x))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_resolution(np.cos(x))


def test_sphere_harmonics_against_scipy():
    ops = SphereHarmonics(1.0, 6)
    for l, m in [(2, 0), (3, 2), (4, -1)]:
        Y = sph_harm_y(l, abs(m), ops.TH, ops.PH)
        ref = Y.real if m == 0 else np.sqrt(2) * (-1) ** m * (Y.real if m > 0 else Y.imag)
        mine = ops.harmonic(l, m)
        # same function up to the sign convention of the associated Legendre functions
        assert np.allclose(np.abs(mine), np.abs(ref), atol=1e-12)
        assert ops.integrate(mine * mine) == pytest.approx(1.0, rel=1e-12)


def test_sphere_laplacian_eigenvalues():
    ops = SphereHarmonics(2.0, 8)
    Y = ops.harmonic(5, 3)
    assert np.allclose(ops.laplacian(Y), -30 / 4 * Y, atol=1e-11)
