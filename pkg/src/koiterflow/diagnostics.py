"""Monitors over computed trajectories: energy balance, Gronwall envelope,
Korn identity and Reynolds transport.  Monitors report; they never abort."""

from dataclasses import dataclass

import numpy as np

from .coupling import EXTRA_COLUMNS, LEDGER_COLUMNS
from .geometry import Cutoff, SurfaceKind
from .koiter import koiter_bilinear, koiter_gradient
from .spectral import fourier_derivative

_COLS = LEDGER_COLUMNS + EXTRA_COLUMNS


def _col(ledger, name):
    return np.asarray(ledger)[:, _COLS.index(name)]


def total_energy(ledger):
    return _col(ledger, "E_kin_fluid") + _col(ledger, "E_kin_shell") + _col(ledger, "E_elastic")


def energy_residual(ledger, t=None):
    """[E(t) - E(0)] + dissipation + damping - work at the node nearest t (default: last)."""
    ledger = np.asarray(ledger)
    if ledger.size == 0:
        return 0.0
    i = -1 if t is None else int(np.argmin(np.abs(ledger[:, 0] - t)))
    E = total_energy(ledger)
    return float(E[i] - E[0] + _col(ledger, "D_visc_cum")[i] + _col(ledger, "D_damp_cum")[i] - _col(ledger, "W_ext_cum")[i])


def energy_nonincreasing(ledger, strict=True):
    dE = np.diff(total_energy(ledger))
    return bool(np.all(dE < 0.0) if strict else np.all(dE <= 0.0))


@dataclass
class GronwallReport:
    c_fit: float
    violated: bool
    lhs: np.ndarray
    bound: np.ndarray
    slack: np.ndarray


def gronwall_envelope(ledger, c_fit=None, c_max=1e3, rtol=1e-6):
    """Check LHS(t) <= e^{c t} (LHS(0) + int (|f|^2 + |g|^2)) + slack.

    LHS uses the norms the solver defines: 2 (kinetic energies + K(eta))
    plus twice the cumulative viscous dissipation.  ``slack`` is twice the
    running maximum of the measured energy residual, the known
    time-integration error.  With ``c_fit`` given the check is performed
    for that constant; otherwise the smallest admissible one is bisected.
    """
    ledger = np.asarray(ledger)
    t = ledger[:, 0]
    lhs = 2.0 * (total_energy(ledger) + _col(ledger, "D_visc_cum") + _col(ledger, "D_damp_cum"))
    data = lhs[0] + _col(ledger, "force_cum")
    slack = 2.0 * np.maximum.accumulate(np.abs(_col(ledger, "residual")))

    def ok(c):
        return bool(np.all(lhs <= np.exp(c * t) * data + slack + 1e-300))

    if c_fit is not None:
        bound = np.exp(c_fit * t) * data + slack
        return GronwallReport(float(c_fit), not ok(c_fit), lhs, bound, slack)
    if ok(0.0):
        c = 0.0
    elif not ok(c_max):
        c = float("inf")
    else:
        lo, hi = 0.0, c_max
        while hi - lo > rtol * max(hi, 1e-12):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        c = hi
    bound = np.exp(c * t) * data + slack if np.isfinite(c) else np.full_like(t, np.inf)
    return GronwallReport(c, not np.isfinite(c), lhs, bound, slack)


# ---------------------------------------------------------------------------
# Korn identity
# ---------------------------------------------------------------------------

def korn_gap(grad, weights):
    """|2 int |Du|^2 - int |grad u|^2| / int |grad u|^2; grad has shape (2, 2, ...)."""
    grad = np.asarray(grad, dtype=float)
    D = 0.5 * (grad + np.swapaxes(grad, 0, 1))
    g2 = float(np.sum(weights * np.einsum("ab...,ab...->...", grad, grad)))
    d2 = float(np.sum(weights * np.einsum("ab...,ab...->...", D, D)))
    if g2 == 0.0:
        return 0.0
    return abs(2.0 * d2 - g2) / g2


def _gauss_diff_matrix(z):
    """Differentiation matrix on the nodes z (exact for polynomials of degree < len(z))."""
    n = z.size
    w = np.array([1.0 / np.prod([z[i] - z[j] for j in range(n) if j != i]) for i in range(n)])
    Dm = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                Dm[i, j] = w[j] / w[i] / (z[i] - z[j])
        Dm[i, i] = -np.sum(Dm[i])
    return Dm


@dataclass
class ChannelSample:
    """Velocity sampled on the unit channel: uniform periodic x, Gauss nodes in z."""

    u: np.ndarray  # (2, nx, nz)
    x: np.ndarray
    z: np.ndarray
    weights: np.ndarray  # (nx, nz)
    length: float


def channel_sample(func, nx=32, nz=16, length=2.0 * np.pi):
    x = np.arange(nx) * length / nx
    zg, wg = np.polynomial.legendre.leggauss(nz)
    z = 0.5 * (zg + 1.0)
    X, Z = np.meshgrid(x, z, indexing="ij")
    w = np.outer(np.full(nx, length / nx), 0.5 * wg)
    return ChannelSample(np.asarray(func(X, Z), dtype=float), x, z, w, length)


def channel_gradient(sample):
    """Spectral in x, polynomial collocation in z; returns (2, 2, nx, nz)."""
    Dz = _gauss_diff_matrix(sample.z)
    u = sample.u
    g = np.empty((2, 2) + u.shape[1:])
    for i in range(2):
        g[i, 0] = fourier_derivative(u[i], sample.length, 1, axis=0)
        g[i, 1] = u[i] @ Dz.T
    return g


def korn_check(sample):
    """Korn gap of a sampled channel velocity (see ``korn_gap``)."""
    return korn_gap(channel_gradient(sample), sample.weights)


def streamfunction_field(k, zpoly, parity="cos"):
    """Velocity (Z'(z) X(x), -Z(z) X'(x)) from psi = X(x) Z(z) with X = cos/sin(kx)."""
    zpoly = np.polynomial.Polynomial(zpoly) if not isinstance(zpoly, np.polynomial.Polynomial) else zpoly
    dz = zpoly.deriv()

    def field(x, z):
        if parity == "cos":
            X, X1 = np.cos(k * x), -k * np.sin(k * x)
        else:
            X, X1 = np.sin(k * x), k * np.cos(k * x)
        return np.array([X * dz(z), -X1 * zpoly(z)])

    return field


def normal_trace_profile(c=1.0, extra=0.0):
    """Z with Z(0) = Z'(0) = Z'(1) = 0 and Z(1) = c (plus a z^2 (1-z)^2 interior part)."""
    P = np.polynomial.Polynomial
    base = c * P([0, 0, 3, -2])  # 3 z^2 - 2 z^3
    return base + extra * P([0, 0, 1, -2, 1])


def slip_profile(slope=1.0, c=1.0):
    """Profile with Z'(1) = slope: tangential slip on the top."""
    P = np.polynomial.Polynomial
    return normal_trace_profile(c) + slope * P([0, 0, -1, 1])


# ---------------------------------------------------------------------------
# Reynolds transport
# ---------------------------------------------------------------------------

def domain_integral(xi, t, eta, nx, nz, length=2.0 * np.pi, cutoff=None):
    """int over {0 < z < 1 + eta(t, x)} of xi(t, x, z), pulled back to the unit box.

    Midpoint rule in the reference height, uniform rule in x.
    """
    cutoff = cutoff or Cutoff(1.0, 0.5, 1.0)
    x = np.arange(nx) * length / nx
    zh = (np.arange(nz) + 0.5) / nz
    X, Zh = np.meshgrid(x, zh, indexing="ij")
    e = eta(t, X)
    b = cutoff.value(Zh - 1.0)
    J = 1.0 + e * cutoff.d1(Zh - 1.0)
    return float(np.sum(xi(t, X, Zh + e * b) * J) * (length / nx) / nz)


def reynolds_check(eta, eta_t, t, dt, nx, nz, xi=None, xi_t=None, length=2.0 * np.pi):
    """|forward-difference rate of int xi - (int d_t xi + int_top eta_t xi)|.

    For the flat top the boundary term per unit length is eta_t xi at the
    surface point (area factor 1).
    """
    xi = xi or (lambda t_, x, z: np.ones_like(x))
    lhs = (domain_integral(xi, t + dt, eta, nx, nz, length) - domain_integral(xi, t, eta, nx, nz, length)) / dt
    x = np.arange(nx) * length / nx
    top = 1.0 + eta(t, x)
    rhs = float(np.sum(eta_t(t, x) * xi(t, x, top)) * length / nx)
    if xi_t is not None:
        rhs += domain_integral(xi_t, t, eta, nx, nz, length)
    return abs(lhs - rhs)


def reynolds_slope(eta, eta_t, t=0.7, dt=0.02, nx=64, nz=8, **kw):
    """Two-resolution log-log slope of the Reynolds residual under (dt, h) -> (dt/2, h/2)."""
    r1 = reynolds_check(eta, eta_t, t, dt, nx, nz, **kw)
    r2 = reynolds_check(eta, eta_t, t, dt / 2.0, nx, 2 * nz, **kw)
    return float(np.log(r1 / r2) / np.log(2.0)), r1, r2


def prescribed_motion(amplitude=0.1, modulation=0.5):
    """eta(t, x) = a sin(t) (1 + m cos x): a breathing, volume-changing top."""
    eta = lambda t, x: amplitude * np.sin(t) * (1.0 + modulation * np.cos(x))  # noqa: E731
    eta_t = lambda t, x: amplitude * np.cos(t) * (1.0 + modulation * np.cos(x))  # noqa: E731
    return eta, eta_t


# ---------------------------------------------------------------------------
# shell-only oscillation on a spectral surface
# ---------------------------------------------------------------------------

def shell_oscillation(geom, params, eta0, eta1, load=None, dt=1e-2, T=1.0):
    """Implicit-midpoint shell dynamics rho eta'' + grad K(eta) = g without fluid.

    Returns the ledger arrays (t, E_kin, K(eta), work, residual).
    """
    rho = params.rho_s
    load = load or (lambda t: np.zeros_like(eta0))
    n = int(round(T / dt))
    eta, vel = np.asarray(eta0, float).copy(), np.asarray(eta1, float).copy()
    out = np.zeros((n + 1, 5))

    def energies(e, v):
        return 0.5 * rho * geom.integrate(v * v), koiter_bilinear(e, e, geom, params)

    ek, el = energies(eta, vel)
    out[0] = [0.0, ek, el, 0.0, 0.0]
    E0, work = ek + el, 0.0
    if geom.kind is SurfaceKind.SPHERE:
        ops = geom.ops
        # grad K is diagonal on spherical harmonics; tabulate its symbol per degree
        sym = []
        for l in range(ops.lmax + 1):
            Y = ops.harmonic(l, 0)
            sym.append(float(ops.integrate(koiter_gradient(Y, geom, params) * Y) / ops.integrate(Y * Y)))
        lam = np.array(sym)[ops.degree]
        analyze, synth = ops.analyze, ops.synthesize
    else:
        L = geom.params["length"]
        k = 2.0 * np.pi * np.fft.rfftfreq(eta.size, d=L / eta.size)
        one = np.cos(np.outer(k, geom.u))
        lam = np.array([float(np.mean(koiter_gradient(c, geom, params) * c) / max(np.mean(c * c), 1e-300)) for c in one])
        analyze = lambda f: np.fft.rfft(f)  # noqa: E731
        synth = lambda c: np.fft.irfft(c, n=eta.size)  # noqa: E731
    a, b = analyze(eta), analyze(vel)
    for i in range(n):
        t0, tm = i * dt, (i + 0.5) * dt
        gm = analyze(load(tm))
        # midpoint: a1 = a + dt/2 (b + b1), rho (b1 - b) = dt (-lam (a + a1)/2 + g)
        denom = rho + 0.25 * dt * dt * lam
        b1 = (rho * b - dt * lam * (a + 0.25 * dt * b) + dt * gm) / denom
        a1 = a + 0.5 * dt * (b + b1)
        vm = synth(0.5 * (b + b1))
        work += dt * geom.integrate(np.real(load(tm) * vm))
        a, b = a1, b1
        eta, vel = np.real(synth(a)), np.real(synth(b))
        ek, el = energies(eta, vel)
        out[i + 1] = [t0 + dt, ek, el, work, ek + el - E0 - work]
    return out
