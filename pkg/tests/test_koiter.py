import json

import numpy as np
import pytest
from scipy.integrate import quad

from koiterflow.errors import InvalidParametersError
from koiterflow.geometry import SurfaceGeometry
from koiterflow.koiter import (
    KoiterParams,
    damped_shell_form,
    energy_breakdown_json,
    koiter_bilinear,
    koiter_energy,
    koiter_forms,
    koiter_gradient,
    plate_coefficient,
)

P = KoiterParams()


def test_forms_zero():
    g = SurfaceGeometry.sphere(1.0, 6)
    f = koiter_forms(np.zeros(g.shape), g)
    assert np.all(f.sigma == 0) and np.max(np.abs(f.xi)) == 0


def test_forms_flat_sine():
    g = SurfaceGeometry.flat(64)
    f = koiter_forms(np.sin(g.u), g)
    assert np.max(np.abs(f.sigma)) == 0
    assert np.allclose(f.xi[0, 0], -np.sin(g.u), atol=1e-12)


def test_forms_sphere_constant():
    g = SurfaceGeometry.sphere(1.0, 6)
    c = 0.3
    f = koiter_forms(np.full(g.shape, c), g)
    assert np.allclose(f.sigma, -c * g.second_form, atol=1e-12)
    assert np.allclose(f.xi, -c * g.k_tensor, atol=1e-10)


def test_bilinear_zero_argument():
    g = SurfaceGeometry.flat(32)
    assert koiter_bilinear(np.zeros(32), np.cos(g.u), g, P) == 0.0


def test_flat_sine_energy_against_quadrature():
    g = SurfaceGeometry.flat(64)
    # oracle: 1-D quadrature of the flat bending integrand (1/2) c (eta'')^2
    c_int = (1.0 / 3.0) * (4 * 1 * 1 / (1 + 2) + 4)
    oracle = 0.5 * c_int * quad(lambda x: np.sin(x) ** 2, 0, 2 * np.pi)[0]
    assert oracle == pytest.approx(8 * np.pi / 9, rel=1e-12)
    assert koiter_energy(np.sin(g.u), g, P) == pytest.approx(oracle, rel=1e-12)


def test_sphere_energy_positive():
    g = SurfaceGeometry.sphere(1.0, 8)
    assert koiter_energy(g.ops.harmonic(2, 0), g, P) > 0


def test_flat_gradient_fourier_symbol():
    g = SurfaceGeometry.flat(64)
    for mode in (np.cos(3 * g.u), np.sin(3 * g.u)):
        assert np.max(np.abs(koiter_gradient(mode, g, P) - 16 / 9 * 81 * mode)) <= 1e-10 * 16 / 9 * 81


def test_gradient_zero():
    g = SurfaceGeometry.sphere(1.0, 6)
    assert np.max(np.abs(koiter_gradient(np.zeros(g.shape), g, P))) == 0


@pytest.mark.parametrize("l", [2, 4])
def test_sphere_duality_random_partners(rng, l):
    g = SurfaceGeometry.sphere(1.0, 10)
    eta = g.ops.harmonic(l, 1)
    grad = koiter_gradient(eta, g, P)
    for _ in range(20):
        zeta = sum(rng.standard_normal() * g.ops.harmonic(k, m) for k in range(6) for m in range(-k, k + 1))
        lhs = g.integrate(grad * zeta)
        rhs = 2 * koiter_bilinear(eta, zeta, g, P)
        scale = np.sqrt(g.integrate(eta**2) * g.integrate(zeta**2))
        assert abs(lhs - rhs) <= 1e-8 * scale


def test_plate_coefficient_values():
    assert plate_coefficient(KoiterParams(1.0, 1.0, 1.0)) == pytest.approx(16 / 9, rel=1e-15)
    assert plate_coefficient(KoiterParams(1.0, 0.0, 1.0)) == pytest.approx(4 / 3, rel=1e-15)
    assert plate_coefficient(KoiterParams(0.5, 1.0, 1.0)) == pytest.approx(16 / 9 / 8, rel=1e-15)


def test_degenerate_shear_modulus_rejected():
    with pytest.raises(InvalidParametersError):
        KoiterParams(1.0, 1.0, 0.0)


def test_damped_form_without_damping():
    g = SurfaceGeometry.flat(64)
    eta, b = np.sin(g.u), np.cos(2 * g.u) + np.sin(g.u)
    assert damped_shell_form(eta, np.cos(g.u), b, 0.0, g, P) == pytest.approx(2 * koiter_bilinear(eta, b, g, P))


def test_damped_form_nonnegative_dissipation(rng):
    g = SurfaceGeometry.flat(64)
    v = rng.standard_normal(64)
    v = np.real(np.fft.ifft(np.fft.fft(v) * (np.abs(np.fft.fftfreq(64, 1 / 64)) < 8)))
    assert damped_shell_form(np.zeros(64), v, v, 0.7, g, P) >= 0


def test_damped_form_flat_value():
    g = SurfaceGeometry.flat(64)
    s = np.sin(g.u)
    assert damped_shell_form(s, s, s, 0.5, g, P) == pytest.approx(8 * np.pi / 3, rel=1e-12)


def test_energy_breakdown(tmp_path):
    g = SurfaceGeometry.sphere(1.0, 8)
    path = tmp_path / "e.json"
    t = energy_breakdown_json(g.ops.harmonic(3, 0), g, P, path)
    d = json.loads(path.read_text())
    assert set(d) == {"membrane", "bending_trace", "bending_full", "total"}
    assert d["total"] == pytest.approx(d["membrane"] + d["bending_trace"] + d["bending_full"])
    assert t["membrane"] > 0
