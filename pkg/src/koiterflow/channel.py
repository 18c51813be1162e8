"""Galerkin basis and coefficient assembly for the periodic channel.

Reference box: x in [0, L) periodic, z in (0, 1).  Bottom wall rigid, top
carries the shell.  The deformed domain is the image of the box under

    Psi(x, z) = (x, z + d(x) b(z)),    b(z) = beta(z - 1),

with ``d`` the (regularized) displacement.  Fluid modes are Piola
pushforwards ``W = dPsi U / J`` of streamfunction fields
``U = (X Z', -X' Z)``, so every mode stays exactly divergence free and its
trace on the top equals ``Y e_z`` with ``Y`` the shell mode.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidDisplacementError, SPDViolationError
from .geometry import Cutoff
from .koiter import KoiterParams, plate_coefficient
from .spectral import trig_eval


def _stokes_profile(k):
    """Z(z) = -c k z cosh(kz) + (c + d z) sinh(kz) with Z(0)=Z'(0)=0, Z(1)=1, Z'(1)=0."""
    ch, sh = np.cosh(k), np.sinh(k)
    # Z(1) = c (sh - k ch) + d sh ; Z'(1) = c (-k^2 sh) + d (sh + k ch)
    M = np.array([[sh - k * ch, sh], [-k * k * sh, sh + k * ch]])
    c, d = np.linalg.solve(M, [1.0, 0.0])

    def Z(z, order=0):
        kz = k * z
        cz, sz = np.cosh(kz), np.sinh(kz)
        if order == 0:
            return -c * k * z * cz + (c + d * z) * sz
        if order == 1:
            return -c * k * k * z * sz + d * sz + (c + d * z) * k * cz - c * k * cz
        # second derivative
        return -c * k**3 * z * cz - 2 * c * k * k * sz + 2 * d * k * cz + (c + d * z) * k * k * sz

    return Z


def _poly_callable(p):
    derivs = (p, p.deriv(1), p.deriv(2))
    return lambda z, order=0: derivs[order](z)


@dataclass
class ModeInfo:
    kind: str  # "shell" or "interior"
    k: int
    parity: str  # "cos" or "sin"
    index: int


class ChannelBasis:
    """Fixed reference modes tabulated at the quadrature nodes.

    ``n_shell`` Fourier wavenumbers for the shell (cos and sin each),
    interior streamfunction modes for wavenumbers ``0..n_fourier`` with
    ``n_poly`` vertical profiles each, Ritz-orthogonalized per wavenumber.
    """

    def __init__(self, length=2.0 * np.pi, height=1.0, n_shell=4, n_fourier=4, n_poly=4, nx=64, nz=32, cutoff=None):
        if height != 1.0:
            raise ValueError("the channel basis is built on a unit-height reference box")
        self.length = float(length)
        self.nx, self.nz = int(nx), int(nz)
        self.n_shell, self.n_fourier, self.n_poly = int(n_shell), int(n_fourier), int(n_poly)
        self.cutoff = cutoff or Cutoff(1.0, 0.95, 0.0)
        self.x = np.arange(self.nx) * self.length / self.nx
        zg, wg = np.polynomial.legendre.leggauss(self.nz)
        self.z = 0.5 * (zg + 1.0)
        self.wz = 0.5 * wg
        self.wx = np.full(self.nx, self.length / self.nx)
        self.weights = np.outer(self.wx, self.wz).ravel()
        self.b = self.cutoff.value(self.z - 1.0)
        self.db = self.cutoff.d1(self.z - 1.0)
        self.d2b = self.cutoff.d2(self.z - 1.0)
        self.omega = 2.0 * np.pi / self.length
        self._build()

    # construction ---------------------------------------------------------
    def _xfun(self, k, parity, x):
        w = self.omega * k
        if parity == "cos":
            return np.cos(w * x), -w * np.sin(w * x), -w * w * np.cos(w * x)
        return np.sin(w * x), w * np.cos(w * x), -w * w * np.sin(w * x)

    def _ritz(self, polys, kw):
        """Combine vertical polynomial profiles into mass-orthonormal eigenmodes."""
        z, w = self.z, self.wz
        Z = np.array([p(z) for p in polys])
        Z1 = np.array([p.deriv(1)(z) for p in polys])
        Z2 = np.array([p.deriv(2)(z) for p in polys])
        mass = (Z1 * w) @ Z1.T + kw**2 * (Z * w) @ Z.T
        stiff = (Z2 * w) @ Z2.T + 2 * kw**2 * (Z1 * w) @ Z1.T + kw**4 * (Z * w) @ Z.T
        _, vec = sla.eigh(stiff, mass)
        return [sum(c * p for c, p in zip(vec[:, m], polys)) for m in range(len(polys))]

    def _build(self):
        # each mode: (info, x-part (k, parity, scale), z-profile callable(z, order))
        modes = []
        for k in range(1, self.n_shell + 1):
            kw = self.omega * k
            prof = _stokes_profile(kw)
            # trace -X' = Y: cos -> X = -sin/kw, sin -> X = cos/kw
            modes.append((ModeInfo("shell", k, "cos", 0), (k, "sin", -1.0 / kw), prof))
            modes.append((ModeInfo("shell", k, "sin", 0), (k, "cos", 1.0 / kw), prof))
        self.n_shell_modes = len(modes)
        if self.n_poly > 0:
            # horizontal shear modes U = (F(z), 0); stored through Z' = F
            shear = []
            for m in range(self.n_poly):
                leg = np.polynomial.Legendre.basis(m, domain=[0.0, 1.0]).convert(kind=np.polynomial.Polynomial)
                shear.append((np.polynomial.Polynomial([0, 1, -1]) * leg).integ())
            F = np.array([p.deriv(1)(self.z) for p in shear])
            F1 = np.array([p.deriv(2)(self.z) for p in shear])
            _, vec = sla.eigh((F1 * self.wz) @ F1.T, (F * self.wz) @ F.T)
            for m in range(self.n_poly):
                p = sum(c * q for c, q in zip(vec[:, m], shear))
                modes.append((ModeInfo("interior", 0, "cos", 0), (0, "cos", 1.0), _poly_callable(p)))
            base = []
            for m in range(self.n_poly):
                leg = np.polynomial.Legendre.basis(m, domain=[0.0, 1.0]).convert(kind=np.polynomial.Polynomial)
                base.append(np.polynomial.Polynomial([0, 0, 1, -2, 1]) * leg)
            for k in range(1, self.n_fourier + 1):
                polys = self._ritz(base, self.omega * k)
                for parity in ("cos", "sin"):
                    for p in polys:
                        modes.append((ModeInfo("interior", k, parity, 0), (k, parity, 1.0), _poly_callable(p)))
        for i, m in enumerate(modes):
            m[0].index = i
        self.info = [m[0] for m in modes]
        self._modes = modes
        self.n = len(modes)
        xhat, zhat = self.mesh()
        self.U, self.dUx, self.dUz = self.reference_fields(xhat, zhat)
        # shell traces on the x grid
        self.Y = np.zeros((self.n, self.nx))
        self.Y2 = np.zeros((self.n, self.nx))
        for m in range(self.n_shell_modes):
            f, _, f2 = self._xfun(self.info[m].k, self.info[m].parity, self.x)
            self.Y[m], self.Y2[m] = f, f2
        sm = (self.Y * self.wx) @ self.Y.T
        self.shell_mass = 0.5 * (sm + sm.T)

    def reference_fields(self, xhat, zhat):
        """Reference velocity U and its x/z derivatives at arbitrary points, each (n, 2, P)."""
        xhat = np.asarray(xhat, dtype=float)
        zhat = np.asarray(zhat, dtype=float)
        n, P = self.n, xhat.size
        U = np.empty((n, 2, P))
        dUx = np.empty((n, 2, P))
        dUz = np.empty((n, 2, P))
        for i, (_, (k, parity, scale), prof) in enumerate(self._modes):
            X, X1, X2 = (scale * a for a in self._xfun(k, parity, xhat))
            Z, Z1, Z2 = prof(zhat, 0), prof(zhat, 1), prof(zhat, 2)
            U[i, 0], U[i, 1] = X * Z1, -X1 * Z
            dUx[i, 0], dUx[i, 1] = X1 * Z1, -X2 * Z
            dUz[i, 0], dUz[i, 1] = X * Z2, -X1 * Z1
        return U, dUx, dUz

    # helpers ----------------------------------------------------------------
    def mesh(self):
        """Reference quadrature nodes flattened to length P (x major)."""
        Xg, Zg = np.meshgrid(self.x, self.z, indexing="ij")
        return Xg.ravel(), Zg.ravel()

    def shell_field(self, coeffs):
        return np.asarray(coeffs) @ self.Y

    def shell_coefficients(self, field):
        """L2 projection of a shell field onto the shell modes (zero-mean part)."""
        rhs = (self.Y * self.wx) @ np.asarray(field, dtype=float)
        out = np.zeros(self.n)
        ns = self.n_shell_modes
        out[:ns] = np.linalg.solve(self.shell_mass[:ns, :ns], rhs[:ns])
        return out

    def elastic_matrix(self, params=None, geometry_kind="flat"):
        """2 K(Y_k, Y_j) for the flat plate: c_B int Y_k'' Y_j''."""
        params = params or KoiterParams()
        cb = plate_coefficient(params)
        return cb * (self.Y2 * self.wx) @ self.Y2.T


def _spectral_derivs(f, length, orders=(0, 1, 2)):
    n = f.size
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    fh = np.fft.fft(f)
    out = []
    for o in orders:
        sym = (1j * k) ** o
        if o % 2 == 1 and n % 2 == 0:
            sym[n // 2] = 0.0
        out.append(np.real(np.fft.ifft(sym * fh)))
    return out


@dataclass
class ChannelGeometry:
    """Displacement data of the deformed box at one instant (on the x grid)."""

    d: np.ndarray
    d_t: np.ndarray

    def derivatives(self, length):
        d0, d1, d2 = _spectral_derivs(self.d, length)
        t0, t1 = _spectral_derivs(self.d_t, length, (0, 1))
        return d0, d1, d2, t0, t1


@dataclass
class ModeFields:
    W: np.ndarray  # (n, 2, P) physical velocity at mapped nodes
    grad: np.ndarray  # (n, 2, 2, P) physical gradient dW_i/dx_a
    dWdt: np.ndarray  # (n, 2, P) Eulerian time derivative
    dWdt_ref: np.ndarray  # (n, 2, P) derivative along fixed reference points
    J: np.ndarray  # (P,)
    J_t: np.ndarray
    points: np.ndarray  # (2, P) physical positions


def mode_fields(basis, geo, need_grad=True, points=None):
    """Pushed-forward modes and their derivatives for the geometry ``geo``.

    By default the quadrature nodes are used; ``points = (xhat, zhat)``
    selects arbitrary reference points instead.
    """
    if points is None:
        nx, nz = basis.nx, basis.nz
        d, d1, d2, dt, dt1 = geo.derivatives(basis.length)
        rep = lambda a: np.repeat(a, nz)  # noqa: E731
        tile = lambda a: np.tile(a, nx)  # noqa: E731
        d, d1, d2, dt, dt1 = (rep(a) for a in (d, d1, d2, dt, dt1))
        b, db, d2b = (tile(a) for a in (basis.b, basis.db, basis.d2b))
        xhat, zhat = basis.mesh()
        U, dUx, dUz = basis.U, basis.dUx, basis.dUz
    else:
        xhat, zhat = (np.asarray(a, dtype=float).ravel() for a in points)
        L = basis.length
        d, d1, d2 = (trig_eval(geo.d, L, xhat, k) for k in (0, 1, 2))
        dt, dt1 = (trig_eval(geo.d_t, L, xhat, k) for k in (0, 1))
        cut = basis.cutoff
        b, db, d2b = cut.value(zhat - 1.0), cut.d1(zhat - 1.0), cut.d2(zhat - 1.0)
        U, dUx, dUz = basis.reference_fields(xhat, zhat)
    J = 1.0 + d * db
    if np.min(J) <= 0.0:
        raise InvalidDisplacementError(f"mapping degenerates (min Jacobian {np.min(J):.3e})")
    iJ = 1.0 / J
    P11 = iJ
    P21 = d1 * b * iJ
    Ux, Uz = U[:, 0], U[:, 1]
    W = np.stack([P11 * Ux, P21 * Ux + Uz], axis=1)
    points = np.array([xhat, zhat + d * b])
    J_t = dt * db
    P11t = -dt * db * iJ**2
    P21t = dt1 * b * iJ - d1 * b * dt * db * iJ**2
    dWdt_ref = np.stack([P11t * Ux, P21t * Ux], axis=1)
    grad = None
    dWdt = None
    if need_grad:
        Jx = d1 * db
        Jz = d * d2b
        P11x = -Jx * iJ**2
        P21x = d2 * b * iJ - d1 * b * Jx * iJ**2
        P11z = -Jz * iJ**2
        P21z = d1 * db * iJ - d1 * b * Jz * iJ**2
        dUxx, dUxz = dUx[:, 0], dUx[:, 1]
        dUzx, dUzz = dUz[:, 0], dUz[:, 1]
        # reference gradient G[i, a] = d_a (P U)_i
        Gxx = P11x * Ux + P11 * dUxx
        Gzx = P21x * Ux + P21 * dUxx + dUxz
        Gxz = P11z * Ux + P11 * dUzx
        Gzz = P21z * Ux + P21 * dUzx + dUzz
        # physical gradient = G dPsi^{-1},  dPsi^{-1} = [[1, 0], [-d' b / J, 1 / J]]
        s = -d1 * b * iJ
        grad = np.empty((U.shape[0], 2, 2, Ux.shape[1]))
        grad[:, 0, 0] = Gxx + Gxz * s
        grad[:, 0, 1] = Gxz * iJ
        grad[:, 1, 0] = Gzx + Gzz * s
        grad[:, 1, 1] = Gzz * iJ
        psi_t = dt * b
        dWdt = dWdt_ref - grad[:, :, 1] * psi_t
    return ModeFields(W, grad, dWdt, dWdt_ref, J, J_t, points)


def mass_matrix(basis, fields):
    n = basis.n
    wJ = basis.weights * fields.J
    Wf = fields.W.reshape(n, -1)
    A = (Wf * np.concatenate([wJ, wJ])) @ Wf.T
    return 0.5 * (A + A.T)


@dataclass
class Assembled:
    A_fluid: np.ndarray
    A_shell: np.ndarray
    A_dot: np.ndarray
    S: np.ndarray
    N: np.ndarray
    V: np.ndarray
    DD: np.ndarray  # 2 int DW_k : DW_j
    GG: np.ndarray  # int grad W_k : grad W_j
    forcing: np.ndarray
    fields: ModeFields
    f_norm2: float = 0.0
    g_norm2: float = 0.0

    @property
    def A(self):
        return self.A_fluid + self.A_shell


def sym_part(grad):
    return 0.5 * (grad + np.swapaxes(grad, 1, 2))


def assemble(basis, geo, adv_coeffs=None, stress=None, visc_coeffs=None, f=None, g=None, t=0.0, rho_s=1.0, mu_floor=1e-8):
    """All time-local Galerkin matrices at one instant.

    ``adv_coeffs``: mode coefficients of the advecting velocity.
    ``stress``: StressModel; p-structure laws use the lagged viscosity
    mu(|D v|) with v given by ``visc_coeffs`` (strain floored at ``mu_floor``).
    ``f``, ``g``: forcing fixtures evaluated at time ``t``.
    """
    F = mode_fields(basis, geo)
    n, P = basis.n, basis.weights.size
    wJ = basis.weights * F.J
    Wf = F.W.reshape(n, 2 * P)
    wt2 = np.concatenate([wJ, wJ])
    Wt = Wf * wt2
    A_fluid = Wt @ Wf.T
    A_fluid = 0.5 * (A_fluid + A_fluid.T)
    # exact time derivative of the fluid mass matrix
    T1 = Wt @ F.dWdt_ref.reshape(n, 2 * P).T
    jt = basis.weights * F.J_t
    A_dot = T1 + T1.T + (Wf * np.concatenate([jt, jt])) @ Wf.T
    A_dot = 0.5 * (A_dot + A_dot.T)
    Te = Wt @ F.dWdt.reshape(n, 2 * P).T  # [j, k] = int dW_k/dt . W_j
    S = 0.5 * (Te - Te.T)
    G = F.grad
    if adv_coeffs is not None and np.any(adv_coeffs):
        adv = np.einsum("k,kip->ip", adv_coeffs, F.W)
        conv = (G[:, :, 0] * adv[0] + G[:, :, 1] * adv[1]).reshape(n, 2 * P)
        Q = Wt @ conv.T  # [j, k] = int (grad W_k adv) . W_j
        N = 0.5 * (Q - Q.T)
    else:
        N = np.zeros((n, n))
    sw = np.sqrt(wJ)
    g00, g11 = G[:, 0, 0] * sw, G[:, 1, 1] * sw
    g01, g10 = G[:, 0, 1] * sw, G[:, 1, 0] * sw
    dxz = 0.5 * (g01 + g10)
    GG = g00 @ g00.T + g11 @ g11.T + g01 @ g01.T + g10 @ g10.T
    DD = 2.0 * (g00 @ g00.T + g11 @ g11.T + 2.0 * dxz @ dxz.T)
    newtonian = stress is None or getattr(stress, "kind", None) == "newtonian"
    if newtonian:
        sigma = 1.0 if stress is None else stress.sigma_visc
        V = sigma * DD
    else:
        if visc_coeffs is None:
            visc_coeffs = np.zeros(n)
        Gv = np.einsum("k,kiap->iap", visc_coeffs, G)
        Dv = 0.5 * (Gv + np.swapaxes(Gv, 0, 1))
        mu = stress.viscosity(np.maximum(np.sqrt(np.einsum("abp,abp->p", Dv, Dv)), mu_floor))
        sm = np.sqrt(mu)
        V = 0.5 * ((g00 * sm) @ (g00 * sm).T + (g11 * sm) @ (g11 * sm).T + 2.0 * (dxz * sm) @ (dxz * sm).T) * 2.0
    GG, DD, V = (0.5 * (M + M.T) for M in (GG, DD, V))
    forcing = np.zeros(n)
    f_norm2 = 0.0
    g_norm2 = 0.0
    if f is not None and not f.is_zero:
        fv = f.fluid(t, F.points[0], F.points[1])
        forcing += Wt @ fv.reshape(-1)
        f_norm2 = float(np.sum(wJ * (fv[0] ** 2 + fv[1] ** 2)))
    if g is not None and not g.is_zero:
        gv = g.shell(t, basis.x)
        forcing += (basis.Y * basis.wx) @ gv
        g_norm2 = float(np.sum(basis.wx * gv**2))
    A_shell = rho_s * basis.shell_mass
    return Assembled(A_fluid, A_shell, A_dot, S, N, V, DD, GG, forcing, F, f_norm2, g_norm2)


def check_spd(A, t=None):
    try:
        sla.cholesky(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SPDViolationError(f"Galerkin mass matrix lost positive definiteness at t={t}") from exc
    return float(sla.eigvalsh(A, subset_by_index=[0, 0])[0])


def velocity_at(fields, coeffs):
    """Fluid velocity sum_k a_k W_k at the mapped nodes, shape (2, P)."""
    return np.einsum("k,kip->ip", np.asarray(coeffs), fields.W)


def sym_grad_at(fields, coeffs):
    return sym_part(np.einsum("k,kiap->iap", np.asarray(coeffs), fields.grad)[None])[0]
