"""Randomized invariants (hypothesis)."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from koiterflow.coupling import Mollifier, mean_correct, mean_functional
from koiterflow.fluid import StressModel, convection_skew, frob, stress
from koiterflow.geometry import HanzawaMap, SurfaceGeometry, gamma, gamma_field
from koiterflow.koiter import KoiterParams, koiter_bilinear, koiter_energy, koiter_gradient, plate_coefficient

FLAT = SurfaceGeometry.flat(64)
SPHERE = SurfaceGeometry.sphere(1.0, 8)
TORUS = SurfaceGeometry.torus(2.0, 1.0, 32, 32)
P = KoiterParams()

finite = st.floats(-10, 10, allow_nan=False)
coeffs = arrays(np.float64, 8, elements=st.floats(-1, 1, allow_nan=False))
susp = settings(max_examples=60, deadline=None)


def _flat_field(c, scale=1.0):
    x = FLAT.u
    f = sum(c[k] * np.cos((k + 1) * x) + c[k + 4] * np.sin((k + 1) * x) for k in range(4))
    return scale * f


def _sphere_field(c):
    modes = [(1, 0), (1, 1), (2, -1), (2, 2), (3, 0), (3, -3), (4, 1), (5, 2)]
    return sum(a * SPHERE.ops.harmonic(l, m) for a, (l, m) in zip(c, modes))


@susp
@given(finite, finite, finite)
def test_gamma_product_identity(h1, h2, eta):
    H, G = 0.5 * (h1 + h2), h1 * h2
    ref = (1 - h1 * eta) * (1 - h2 * eta)
    assert abs(gamma(H, G, eta) - ref) <= 1e-12 * max(1.0, abs(ref), (1 + abs(h1 * eta)) * (1 + abs(h2 * eta)))


@susp
@given(st.floats(-0.99, 0.99), coeffs)
def test_gamma_positive_below_tube_radius(level, c):
    for geom in (SPHERE, TORUS):
        f = np.cos(geom.u) * c[0] + np.sin(2 * geom.v) * c[1] + level
        m = np.max(np.abs(f))
        eta = f / m * 0.99 * geom.kappa if m > 0 else f
        assert np.min(gamma_field(geom, eta)) > 0


@susp
@given(coeffs, st.floats(0.05, 0.6))
def test_hanzawa_round_trip(c, amp):
    eta = _flat_field(c)
    m = np.max(np.abs(eta))
    if m == 0:
        return
    h = HanzawaMap(FLAT, amp * eta / m)
    rng = np.random.default_rng(int(1e6 * amp))
    pts = np.column_stack([rng.uniform(0, 2 * np.pi, 20), rng.uniform(0, 1, 20)])
    assert np.max(np.abs(h.inverse(h.forward(pts)) - pts)) <= 1e-10
    assert np.all(h.det(pts) > 0)


@susp
@given(coeffs, coeffs, st.floats(-3, 3))
def test_mean_correct_linear_and_idempotent(c1, c2, s):
    eta = _flat_field(c1, 0.05)
    b1, b2 = _flat_field(c2) + 0.3, np.cos(FLAT.u) ** 2
    M = lambda b: mean_correct(b, eta, FLAT)  # noqa: E731
    lin = M(b1 + s * b2) - (M(b1) + s * M(b2))
    assert np.max(np.abs(lin)) <= 1e-12 * (1 + abs(s))
    assert abs(mean_functional(M(b1), eta, FLAT)) <= 1e-12
    assert np.max(np.abs(M(M(b1)) - M(b1))) <= 1e-12


def _sym(a):
    A = np.asarray(a).reshape(3, 3)
    return 0.5 * (A + A.T)


mats = arrays(np.float64, 9, elements=st.floats(-5, 5, allow_nan=False))
models = st.sampled_from([("additive", p, d) for p in (1.5, 2.0, 3.0) for d in (0.0, 1.0)]
                         + [("quadratic", p, d) for p in (1.5, 2.0, 3.0) for d in (0.0, 1.0)])


@susp
@given(models, mats, mats)
def test_stress_monotone_and_symmetric(model, a, b):
    kind, p, d = model
    S = getattr(StressModel, kind)(1.0, d, p)
    A, B = _sym(a), _sym(b)
    SA, SB = stress(S, A), stress(S, B)
    assert np.allclose(SA, SA.T, atol=0)
    scale = 1e-12 * (1 + frob(SA) + frob(SB)) * (1 + frob(A) + frob(B))
    assert np.sum((SA - SB) * (A - B)) >= -scale


@susp
@given(models, mats, arrays(np.float64, 3, elements=st.floats(-3, 3, allow_nan=False)))
def test_stress_frame_indifference(model, a, w):
    kind, p, d = model
    S = getattr(StressModel, kind)(1.0, d, p)
    A = _sym(a)
    K = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    Q, _ = np.linalg.qr(np.eye(3) + K)
    lhs = stress(S, Q @ A @ Q.T)
    rhs = Q @ stress(S, A) @ Q.T
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


@susp
@given(arrays(np.float64, (2, 2, 8, 8), elements=st.floats(-2, 2, allow_nan=False)))
def test_skew_convection_neutral(data):
    v, u = data
    a1, a2 = convection_skew(v, u, u, (2 * np.pi, 2 * np.pi))
    assert a1 == a2


@susp
@given(st.floats(1e-4, 1.0), st.floats(-100, 100), coeffs)
def test_mollifier_constant_shift(eps, c, co):
    m = Mollifier(eps)
    assert np.array_equal(m.static(np.full(64, c)), np.full(64, c) + np.sqrt(eps))
    f = _flat_field(co)
    assert abs(np.mean(m.static(f)) - np.mean(f) - np.sqrt(eps)) <= 1e-13 * (1 + np.max(np.abs(f)))


@susp
@given(coeffs, coeffs)
def test_koiter_symmetry_positivity_duality_sphere(c1, c2):
    eta, zeta = _sphere_field(c1), _sphere_field(c2)
    assert koiter_bilinear(eta, zeta, SPHERE, P) == koiter_bilinear(zeta, eta, SPHERE, P)
    assert koiter_energy(eta, SPHERE, P) >= -1e-12
    lhs = SPHERE.integrate(koiter_gradient(eta, SPHERE, P) * zeta)
    scale = np.sqrt(SPHERE.integrate(eta**2) * SPHERE.integrate(zeta**2))
    assert abs(lhs - 2 * koiter_bilinear(eta, zeta, SPHERE, P)) <= 1e-8 * max(scale, 1e-300)


@susp
@given(coeffs, coeffs)
def test_koiter_flat_duality(c1, c2):
    eta, zeta = _flat_field(c1), _flat_field(c2)
    assert koiter_bilinear(eta, zeta, FLAT, P) == koiter_bilinear(zeta, eta, FLAT, P)
    assert koiter_energy(eta, FLAT, P) >= -1e-12
    lhs = FLAT.integrate(koiter_gradient(eta, FLAT, P) * zeta)
    scale = np.sqrt(FLAT.integrate(eta**2) * FLAT.integrate(zeta**2)) * 1000
    assert abs(lhs - 2 * koiter_bilinear(eta, zeta, FLAT, P)) <= 1e-8 * max(scale, 1e-300)


@susp
@given(st.floats(0.0, 10.0), st.floats(0.01, 10.0))
def test_plate_coefficient_identity(lam, mu):
    lhs = 4 * lam * mu / (lam + 2 * mu) + 4 * mu
    rhs = 8 * mu * (lam + mu) / (lam + 2 * mu)
    assert abs(lhs - rhs) <= 1e-12 * rhs
    assert plate_coefficient(KoiterParams(1.0, lam, mu)) > 0
