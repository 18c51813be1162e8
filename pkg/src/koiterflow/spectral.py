"""Spectral building blocks: periodic Fourier calculus and real spherical harmonics."""

import warnings

import numpy as np

from .errors import AliasingWarning

ALIAS_TOL = 1e-10


# ---------------------------------------------------------------------------
# periodic Fourier calculus
# ---------------------------------------------------------------------------

def wavenumbers(n, length):
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def fourier_derivative(f, length, order=1, axis=-1):
    """Spectral derivative of a periodic sample along ``axis``.

    The Nyquist mode is dropped for odd orders so real input stays real.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    k = wavenumbers(n, length)
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = n
    symbol = ((1j * k) ** order).reshape(shape)
    return np.real(np.fft.ifft(symbol * np.fft.fft(f, axis=axis), axis=axis))


def check_resolution(f, frac=0.1, axis=-1):
    """Warn when the top ``frac`` of the spectrum of ``f`` carries energy."""
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    spec = np.abs(np.fft.rfft(f, axis=axis))
    total = spec.max() if spec.size else 0.0
    if total == 0.0:
        return False
    top = int(np.ceil(n // 2 * (1.0 - frac)))
    tail = np.take(spec, np.arange(top, spec.shape[axis]), axis=axis)
    if tail.size and tail.max() > ALIAS_TOL * total:
        warnings.warn(
            f"spectral content near the grid cutoff (ratio {tail.max() / total:.2e})",
            AliasingWarning,
            stacklevel=3,
        )
        return True
    return False


def trig_eval(f, length, x, deriv=0):
    """Evaluate the trigonometric interpolant of periodic samples ``f`` at ``x``.

    ``f`` holds samples at ``j*length/n``; ``x`` may have any shape (real or
    complex).  ``deriv`` selects the derivative order.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    c = np.fft.fft(f) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    w = np.ones(n)
    if n % 2 == 0:
        # split the Nyquist coefficient between +n/2 and -n/2
        k = np.concatenate([k, [n // 2]])
        c = np.concatenate([c, [c[n // 2]]])
        w = np.concatenate([w, [1.0]])
        w[n // 2] = 0.5
        w[-1] = 0.5
        k[n // 2] = -n // 2
    omega = 2.0 * np.pi * k / length
    x = np.asarray(x)
    phase = np.exp(1j * np.multiply.outer(x, omega))
    coeff = c * w * (1j * omega) ** deriv
    val = phase @ coeff
    if np.isrealobj(x):
        return np.real(val)
    return val


def periodic_grid(n, length):
    return np.arange(n) * (length / n)


# ---------------------------------------------------------------------------
# spherical harmonics
# ---------------------------------------------------------------------------

def _legendre_table(lmax, theta):
    """Normalized associated Legendre functions and two theta-derivatives.

    Returns arrays P, dP, d2P of shape (lmax+1, lmax+1, len(theta)) indexed
    [l, m], normalized so that the real spherical harmonics built from them
    are orthonormal on the unit sphere.  Nodes must avoid the poles.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = np.sin(theta)
    nt = theta.size
    P = np.zeros((lmax + 1, lmax + 1, nt))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, lmax + 1):
        P[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = np.sqrt(2 * m + 3.0) * x * P[m, m]
    for m in range(0, lmax + 1):
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[l, m] = a * (x * P[l - 1, m] - b * P[l - 2, m])
    dP = np.zeros_like(P)
    for m in range(0, lmax + 1):
        for l in range(m, lmax + 1):
            prev = P[l - 1, m] if l - 1 >= m else 0.0
            c = np.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0)) if l > m else 0.0
            dP[l, m] = (l * x * P[l, m] - c * prev) / s
    d2P = np.zeros_like(P)
    for m in range(0, lmax + 1):
        for l in range(m, lmax + 1):
            d2P[l, m] = -(x / s) * dP[l, m] - (l * (l + 1) - m * m / s**2) * P[l, m]
    return P, dP, d2P


class SphereHarmonics:
    """Real spherical-harmonic transform on a Gauss-Legendre x uniform grid.

    Functions are sampled on ``(nlat, nlon)`` arrays.  Basis index order is
    ``(l, m)`` for ``l <= lmax``, ``-l <= m <= l`` with ``m < 0`` the sine
    modes.  All derivative quantities are exact for fields band-limited to
    ``lmax``.
    """

    def __init__(self, radius=1.0, lmax=12, nlat=None, nlon=None):
        self.radius = float(radius)
        self.lmax = int(lmax)
        self.nlat = int(nlat or self.lmax + 2)
        self.nlon = int(nlon or 2 * self.lmax + 4)
        xg, wg = np.polynomial.legendre.leggauss(self.nlat)
        self.theta = np.arccos(xg)[::-1]
        self.lat_weights = wg[::-1]
        self.phi = 2.0 * np.pi * np.arange(self.nlon) / self.nlon
        self.shape = (self.nlat, self.nlon)
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        self.TH, self.PH = th, ph
        # quadrature weights for the sphere of radius R
        self.weights = (
            np.outer(self.lat_weights, np.full(self.nlon, 2.0 * np.pi / self.nlon))
            * self.radius**2
        )
        self.lm = [(l, m) for l in range(self.lmax + 1) for m in range(-l, l + 1)]
        self.degree = np.array([l for l, _ in self.lm])
        self._build_tables()

    # basis tables -----------------------------------------------------------
    def _basis_at(self, theta, phi):
        theta = np.asarray(theta, dtype=float).ravel()
        phi = np.asarray(phi, dtype=float).ravel()
        P, dP, d2P = _legendre_table(self.lmax, theta)
        nb = len(self.lm)
        out = {key: np.zeros((nb, theta.size)) for key in ("f", "t", "p", "tt", "tp", "pp")}
        for i, (l, m) in enumerate(self.lm):
            am = abs(m)
            if m == 0:
                c, dc, d2c = np.ones_like(phi), np.zeros_like(phi), np.zeros_like(phi)
                scale = 1.0
            elif m > 0:
                c, dc, d2c = np.cos(m * phi), -m * np.sin(m * phi), -(m * m) * np.cos(m * phi)
                scale = np.sqrt(2.0)
            else:
                c, dc, d2c = np.sin(am * phi), am * np.cos(am * phi), -(am * am) * np.sin(am * phi)
                scale = np.sqrt(2.0)
            out["f"][i] = scale * P[l, am] * c
            out["t"][i] = scale * dP[l, am] * c
            out["p"][i] = scale * P[l, am] * dc
            out["tt"][i] = scale * d2P[l, am] * c
            out["tp"][i] = scale * dP[l, am] * dc
            out["pp"][i] = scale * P[l, am] * d2c
        return out

    def _build_tables(self):
        tab = self._basis_at(self.TH.ravel(), self.PH.ravel())
        self._Y = tab["f"]
        self._tab = tab
        self._wflat = self.weights.ravel() / self.radius**2

    # transforms -------------------------------------------------------------
    def analyze(self, f):
        f = np.asarray(f, dtype=float).reshape(-1)
        return self._Y @ (self._wflat * f)

    def synthesize(self, coeffs, kind="f"):
        return (np.asarray(coeffs) @ self._tab[kind]).reshape(self.shape)

    def evaluate(self, coeffs, theta, phi, kind="f"):
        tab = self._basis_at(theta, phi)
        return np.asarray(coeffs) @ tab[kind]

    def harmonic(self, l, m):
        c = np.zeros(len(self.lm))
        c[self.lm.index((l, m))] = 1.0
        return self.synthesize(c)

    def check_band_limit(self, f, coeffs=None):
        if coeffs is None:
            coeffs = self.analyze(f)
        resid = np.max(np.abs(self.synthesize(coeffs) - f))
        scale = max(np.max(np.abs(f)), 1e-300)
        if resid > ALIAS_TOL * scale:
            warnings.warn(
                f"field not resolved by lmax={self.lmax} (residual {resid:.2e})",
                AliasingWarning,
                stacklevel=3,
            )
            return False
        return True

    # frames -----------------------------------------------------------------
    def frame(self):
        """Ambient unit vectors e_theta, e_phi, nu on the grid, shape (3, nlat, nlon)."""
        th, ph = self.TH, self.PH
        e_t = np.array([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)])
        e_p = np.array([-np.sin(ph), np.cos(ph), np.zeros_like(th)])
        nu = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        return e_t, e_p, nu

    # calculus ---------------------------------------------------------------
    def laplacian_coeffs(self, coeffs):
        return -self.degree * (self.degree + 1) / self.radius**2 * coeffs

    def laplacian(self, f):
        return self.synthesize(self.laplacian_coeffs(self.analyze(f)))

    def gradient_frame(self, f=None, coeffs=None):
        """Components of the surface gradient in the (e_theta, e_phi) frame."""
        if coeffs is None:
            coeffs = self.analyze(f)
        R = self.radius
        ft = self.synthesize(coeffs, "t")
        fp = self.synthesize(coeffs, "p")
        return np.array([ft / R, fp / (R * np.sin(self.TH))])

    def gradient_ambient(self, f=None, coeffs=None):
        g = self.gradient_frame(f, coeffs)
        e_t, e_p, _ = self.frame()
        return g[0] * e_t + g[1] * e_p

    def hessian_frame(self, f=None, coeffs=None):
        """Covariant Hessian in the orthonormal (e_theta, e_phi) frame, shape (2, 2, nlat, nlon)."""
        if coeffs is None:
            coeffs = self.analyze(f)
        R = self.radius
        s = np.sin(self.TH)
        cot = np.cos(self.TH) / s
        ft = self.synthesize(coeffs, "t")
        fp = self.synthesize(coeffs, "p")
        ftt = self.synthesize(coeffs, "tt")
        ftp = self.synthesize(coeffs, "tp")
        fpp = self.synthesize(coeffs, "pp")
        h_tt = ftt / R**2
        h_tp = (ftp - cot * fp) / (R**2 * s)
        h_pp = (fpp / s**2 + cot * ft) / R**2
        return np.array([[h_tt, h_tp], [h_tp, h_pp]])

    def integrate(self, f):
        return float(np.sum(self.weights * f))
