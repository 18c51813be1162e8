"""Incompressible fluid toolkit: stress models, finite-difference calculus,
skew-split convection, MAC projection and a MAC Stokes solver for the
periodic channel."""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FluxCompatibilityError, InvalidParametersError, SolverConvergenceError


# ---------------------------------------------------------------------------
# stress models
# ---------------------------------------------------------------------------

class StressKind(str, enum.Enum):
    NEWTONIAN = "newtonian"
    ADDITIVE = "pstructure_additive"
    QUADRATIC = "pstructure_quadratic"


@dataclass(frozen=True)
class StressModel:
    """Viscous stress law.

    Newtonian stress is ``2 sigma_visc D``; the p-structure laws are
    ``mu0 (delta + |D|)^(p-2) D`` (additive) and
    ``mu0 (delta^2 + |D|^2)^((p-2)/2) D`` (quadratic).  At ``p = 2`` both
    equal the Newtonian law with ``sigma_visc = mu0 / 2``.
    """

    kind: StressKind = StressKind.NEWTONIAN
    sigma_visc: float = 1.0
    mu0: float = 1.0
    delta: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "kind", StressKind(self.kind))
        if self.kind is StressKind.NEWTONIAN:
            if not self.sigma_visc > 0:
                raise InvalidParametersError("sigma_visc must be positive")
        else:
            if not self.mu0 > 0:
                raise InvalidParametersError("mu0 must be positive")
            if self.delta < 0:
                raise InvalidParametersError("delta must be nonnegative")
            if not 1.0 < self.p < np.inf:
                raise InvalidParametersError("p must lie in (1, inf)")

    @classmethod
    def newtonian(cls, sigma_visc=1.0):
        return cls(StressKind.NEWTONIAN, sigma_visc=sigma_visc)

    @classmethod
    def additive(cls, mu0, delta, p):
        return cls(StressKind.ADDITIVE, mu0=mu0, delta=delta, p=p)

    @classmethod
    def quadratic(cls, mu0, delta, p):
        return cls(StressKind.QUADRATIC, mu0=mu0, delta=delta, p=p)

    @property
    def exponent(self):
        return 2.0 if self.kind is StressKind.NEWTONIAN else self.p

    @property
    def offset(self):
        return 0.0 if self.kind is StressKind.NEWTONIAN else self.delta

    def viscosity(self, dnorm):
        """Scalar factor mu with S(D) = mu(|D|) D."""
        dnorm = np.asarray(dnorm, dtype=float)
        if self.kind is StressKind.NEWTONIAN:
            return np.full(dnorm.shape, 2.0 * self.sigma_visc)
        e = self.p - 2.0
        if e == 0.0:
            return np.full(dnorm.shape, self.mu0)
        if self.kind is StressKind.ADDITIVE:
            base = self.delta + dnorm
        else:
            base = np.sqrt(self.delta**2 + dnorm**2)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu = self.mu0 * base**e
        return np.where(base > 0, mu, 0.0 if e > 0 else np.inf)


def frob(D):
    return np.sqrt(np.einsum("...ij,...ij->...", D, D))


def stress(model, D, check=True):
    """S(D) for symmetric D of shape (..., d, d)."""
    D = np.asarray(D, dtype=float)
    if check and not np.allclose(D, np.swapaxes(D, -1, -2), rtol=0.0, atol=1e-12 * max(1.0, np.max(np.abs(D), initial=0.0))):
        raise ValueError("stress input must be symmetric")
    if callable(model) and not isinstance(model, StressModel):
        return model(D)
    n = frob(D)
    mu = model.viscosity(n)
    mu = np.where(n > 0, mu, 0.0)
    return mu[..., None, None] * D


def _random_symmetric(rng, n, d, scale):
    A = rng.standard_normal((n, d, d))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    return A * scale[:, None, None]


def p_structure_audit(model, n_samples=10_000, seed=0, dim=3, p=None, delta=None):
    """Sample random symmetric pairs and test growth, coercivity and monotonicity.

    ``model`` is a StressModel or a callable ``D -> S(D)``; for callables the
    reference exponent ``p`` and offset ``delta`` default to 2 and 0.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, StressModel):
        p = model.exponent if p is None else p
        delta = model.offset if delta is None else delta
    else:
        p = 2.0 if p is None else p
        delta = 0.0 if delta is None else delta
    scale_d = 10.0 ** rng.uniform(-3, 3, n_samples)
    scale_e = np.where(rng.random(n_samples) < 0.5, scale_d, 10.0 ** rng.uniform(-3, 3, n_samples))
    D = _random_symmetric(rng, n_samples, dim, scale_d)
    E = _random_symmetric(rng, n_samples, dim, scale_e)
    SD = stress(model, D, check=False)
    SE = stress(model, E, check=False)
    nd = frob(D)
    weight = (delta + nd) ** (p - 2.0)
    growth_ratio = frob(SD) / (weight * nd)
    coerc_ratio = np.einsum("...ij,...ij->...", SD, D) / (weight * nd**2)
    mono = np.einsum("...ij,...ij->...", SD - SE, D - E)
    diff = frob(D - E)
    violations = int(np.sum((mono <= 0.0) & (diff > 0.0)))
    sym_err = float(np.max(np.abs(SD - np.swapaxes(SD, -1, -2))))
    c0 = float(np.max(growth_ratio))
    c1 = float(np.min(coerc_ratio))
    return {
        "n_samples": n_samples,
        "growth_ok": bool(np.isfinite(c0)),
        "coercivity_ok": bool(c1 > 0.0),
        "monotone_violations": violations,
        "symmetric_ok": sym_err <= 1e-12 * max(1.0, float(np.max(np.abs(SD)))),
        "c0": c0,
        "c1": c1,
        "p": p,
        "delta": delta,
    }


# ---------------------------------------------------------------------------
# collocated finite differences
# ---------------------------------------------------------------------------

def _diff(f, h, axis, periodic):
    if periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def velocity_gradient(u, spacing, periodic=None):
    """grad u[i, j] = d u_i / d x_j via second-order centered differences.

    ``u`` has shape (d, n_1, ..., n_d); returns shape (d, d, n_1, ..., n_d).
    """
    u = np.asarray(u, dtype=float)
    d = u.shape[0]
    periodic = periodic or (False,) * d
    return np.array([[_diff(u[i], spacing[j], j, periodic[j]) for j in range(d)] for i in range(d)])


def sym_gradient(u, spacing, periodic=None):
    g = velocity_gradient(u, spacing, periodic)
    return 0.5 * (g + np.swapaxes(g, 0, 1))


def divergence(u, spacing, periodic=None):
    g = velocity_gradient(u, spacing, periodic)
    return np.einsum("ii...->...", g)


def _spectral_diff(f, length, axis):
    from .spectral import fourier_derivative

    return fourier_derivative(f, length, 1, axis=axis)


def convection_skew(v, u, phi, lengths):
    """Skew-split convection pieces on a fully periodic collocated grid.

    Returns ``(a1, a2)`` with ``a1 = 1/2 int (v.grad) u . phi`` and
    ``a2 = 1/2 int (v.grad) phi . u``; derivatives are spectral.
    """
    v, u, phi = (np.asarray(a, dtype=float) for a in (v, u, phi))
    d = v.shape[0]
    cell = np.prod([L / n for L, n in zip(lengths, v.shape[1:])])

    def advect(w):
        return np.array([sum(v[j] * _spectral_diff(w[i], lengths[j], j) for j in range(d)) for i in range(d)])

    a1 = 0.5 * cell * float(np.sum(advect(u) * phi))
    a2 = 0.5 * cell * float(np.sum(advect(phi) * u))
    return a1, a2


# ---------------------------------------------------------------------------
# MAC grid on the periodic channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MacGrid:
    """Staggered grid on [0, length) x [0, height], periodic in x.

    ``u[i, j]`` sits at (i dx, (j+1/2) dz), ``w[i, j]`` at ((i+1/2) dx, j dz)
    for j = 0..nz (wall rows included), pressure at cell centres.
    """

    nx: int
    nz: int
    length: float = 2.0 * np.pi
    height: float = 1.0

    @property
    def dx(self):
        return self.length / self.nx

    @property
    def dz(self):
        return self.height / self.nz

    def u_points(self):
        x = np.arange(self.nx) * self.dx
        z = (np.arange(self.nz) + 0.5) * self.dz
        return np.meshgrid(x, z, indexing="ij")

    def w_points(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        z = np.arange(self.nz + 1) * self.dz
        return np.meshgrid(x, z, indexing="ij")

    def centers(self):
        x = (np.arange(self.nx) + 0.5) * self.dx
        z = (np.arange(self.nz) + 0.5) * self.dz
        return np.meshgrid(x, z, indexing="ij")

    def zeros(self):
        return np.zeros((self.nx, self.nz)), np.zeros((self.nx, self.nz + 1))


@dataclass
class FluidState:
    grid: MacGrid
    u: np.ndarray
    w: np.ndarray
    p: np.ndarray = None
    t: float = 0.0
    div_tol: float = float("nan")

    def __post_init__(self):
        if self.p is None:
            self.p = np.zeros((self.grid.nx, self.grid.nz))
        self.div_tol = float(np.max(np.abs(mac_divergence(self.grid, self.u, self.w)), initial=0.0))


def mac_divergence(grid, u, w):
    return (np.roll(u, -1, 0) - u) / grid.dx + (w[:, 1:] - w[:, :-1]) / grid.dz


def mac_gradient(grid, phi):
    """Discrete gradient on faces; wall-normal components vanish."""
    gx = (phi - np.roll(phi, 1, 0)) / grid.dx
    gz = np.zeros((grid.nx, grid.nz + 1))
    gz[:, 1:-1] = (phi[:, 1:] - phi[:, :-1]) / grid.dz
    return gx, gz


def _mac_laplacian_matrix(grid):
    nx, nz, dx, dz = grid.nx, grid.nz, grid.dx, grid.dz
    ex = np.ones(nx)
    Lx = sp.diags([ex[:-1], -2 * ex, ex[:-1]], [-1, 0, 1], shape=(nx, nx), format="lil")
    Lx[0, nx - 1] = 1.0
    Lx[nx - 1, 0] = 1.0
    Lx = Lx.tocsr() / dx**2
    ez = np.ones(nz)
    main = -2 * ez
    main[0] = main[-1] = -1.0
    Lz = sp.diags([ez[:-1], main, ez[:-1]], [-1, 0, 1], shape=(nz, nz), format="csr") / dz**2
    return (sp.kron(Lx, sp.identity(nz)) + sp.kron(sp.identity(nx), Lz)).tocsr()


def pressure_projection(grid, u_star, w_star, tol=1e-8, maxiter=10_000):
    """Project (u*, w*) onto discretely divergence-free fields.

    Solves the Neumann Poisson problem  div grad phi = div u*  by conjugate
    gradients and returns ``(FluidState, phi)`` with zero-mean phi.
    """
    rhs = mac_divergence(grid, u_star, w_star).ravel()
    flux = float(np.sum(rhs)) * grid.dx * grid.dz
    if abs(flux) > 1e-10 * max(1.0, float(np.abs(rhs).sum()) * grid.dx * grid.dz):
        raise FluxCompatibilityError(f"net boundary flux {flux:.3e} prevents a divergence-free projection", flux)
    rhs = rhs - rhs.mean()
    A = -_mac_laplacian_matrix(grid)
    history = []
    scale = max(float(np.linalg.norm(rhs)), 1e-300)

    def record(xk):
        history.append(float(np.linalg.norm(A @ xk + rhs)) / scale)

    if np.linalg.norm(rhs) == 0.0:
        phi = np.zeros_like(rhs)
    else:
        phi, info = spla.cg(A, -rhs, rtol=1e-14, atol=0.0, maxiter=maxiter, callback=record)
    phi = phi - phi.mean()
    phi = phi.reshape(grid.nx, grid.nz)
    gx, gz = mac_gradient(grid, phi)
    u = u_star - gx
    w = w_star - gz
    state = FluidState(grid, u, w, phi)
    if state.div_tol > tol:
        raise SolverConvergenceError(
            f"projection reached max|div| = {state.div_tol:.3e} > {tol:.1e}", history
        )
    return state, phi


def stokes_solve(grid, top_u, top_w, bottom_u=None, bottom_w=None, flux_tol=1e-10):
    """Steady Stokes flow in the MAC channel with Dirichlet velocity on both walls.

    ``top_u``/``bottom_u`` are tangential values at the u-abscissae
    ``i dx``; ``top_w``/``bottom_w`` are normal values at ``(i+1/2) dx``.
    Returns a FluidState whose wall-normal rows equal the data exactly and
    whose tangential trace matches to second order.
    """
    nx, nz, dx, dz = grid.nx, grid.nz, grid.dx, grid.dz
    top_u = np.broadcast_to(np.asarray(top_u, dtype=float), (nx,))
    top_w = np.broadcast_to(np.asarray(top_w, dtype=float), (nx,))
    bottom_u = np.zeros(nx) if bottom_u is None else np.broadcast_to(np.asarray(bottom_u, dtype=float), (nx,))
    bottom_w = np.zeros(nx) if bottom_w is None else np.broadcast_to(np.asarray(bottom_w, dtype=float), (nx,))
    flux = float(np.sum(top_w - bottom_w) * dx)
    if abs(flux) > flux_tol:
        raise FluxCompatibilityError(f"boundary data carries net flux {flux:.3e}", flux)

    nu_, nw_, np_ = nx * nz, nx * (nz - 1), nx * nz
    iu = lambda i, j: (i % nx) * nz + j  # noqa: E731
    iw = lambda i, j: nu_ + (i % nx) * (nz - 1) + (j - 1)  # interior faces j = 1..nz-1  # noqa: E731
    ip = lambda i, j: nu_ + nw_ + (i % nx) * nz + j  # noqa: E731
    lam = nu_ + nw_ + np_
    rows, cols, vals = [], [], []
    rhs = np.zeros(lam + 1)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # u momentum: -lap u + dp/dx = 0
    for i in range(nx):
        for j in range(nz):
            r = iu(i, j)
            add(r, iu(i, j), 2.0 / dx**2)
            add(r, iu(i - 1, j), -1.0 / dx**2)
            add(r, iu(i + 1, j), -1.0 / dx**2)
            diag = 0.0
            for jj, wall in ((j - 1, bottom_u[i]), (j + 1, top_u[i])):
                if 0 <= jj < nz:
                    add(r, iu(i, jj), -1.0 / dz**2)
                    diag += 1.0 / dz**2
                else:
                    # ghost value 2 g - u_ij
                    diag += 2.0 / dz**2
                    rhs[r] += 2.0 * wall / dz**2
            add(r, iu(i, j), diag)
            add(r, ip(i, j), 1.0 / dx)
            add(r, ip(i - 1, j), -1.0 / dx)
    # w momentum on interior faces
    for i in range(nx):
        for j in range(1, nz):
            r = iw(i, j)
            add(r, iw(i, j), 2.0 / dx**2 + 2.0 / dz**2)
            add(r, iw(i - 1, j), -1.0 / dx**2)
            add(r, iw(i + 1, j), -1.0 / dx**2)
            for jj, wall in ((j - 1, bottom_w[i]), (j + 1, top_w[i])):
                if 1 <= jj <= nz - 1:
                    add(r, iw(i, jj), -1.0 / dz**2)
                else:
                    rhs[r] += wall / dz**2
            add(r, ip(i, j), 1.0 / dz)
            add(r, ip(i, j - 1), -1.0 / dz)
    # continuity (with a multiplier column that vanishes for compatible data)
    for i in range(nx):
        for j in range(nz):
            r = ip(i, j)
            add(r, iu(i + 1, j), 1.0 / dx)
            add(r, iu(i, j), -1.0 / dx)
            if j + 1 <= nz - 1:
                add(r, iw(i, j + 1), 1.0 / dz)
            else:
                rhs[r] -= top_w[i] / dz
            if j >= 1:
                add(r, iw(i, j), -1.0 / dz)
            else:
                rhs[r] += bottom_w[i] / dz
            add(r, lam, 1.0)
            add(lam, ip(i, j), 1.0)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(lam + 1, lam + 1))
    lu = spla.splu(A)
    sol = lu.solve(rhs)
    for _ in range(2):  # iterative refinement keeps the divergence at round-off on fine grids
        sol += lu.solve(rhs - A @ sol)
    u = sol[:nu_].reshape(nx, nz)
    w = np.zeros((nx, nz + 1))
    w[:, 0] = bottom_w
    w[:, -1] = top_w
    w[:, 1:-1] = sol[nu_:nu_ + nw_].reshape(nx, nz - 1)
    p = sol[nu_ + nw_:lam].reshape(nx, nz)
    return FluidState(grid, u, w, p - p.mean())


def sample_mac(grid, u, w, x, z):
    """Bilinear interpolation of MAC components at points (x, z)."""
    x = np.mod(np.asarray(x, dtype=float), grid.length)
    z = np.asarray(z, dtype=float)

    def interp(field, x0, z0, nzf):
        fx = (x - x0) / grid.dx
        i0 = np.floor(fx).astype(int)
        tx = fx - i0
        fz = np.clip((z - z0) / grid.dz, 0.0, nzf - 1.0)
        j0 = np.minimum(np.floor(fz).astype(int), nzf - 2)
        tz = fz - j0
        i0 %= grid.nx
        i1 = (i0 + 1) % grid.nx
        return (
            (1 - tx) * (1 - tz) * field[i0, j0]
            + tx * (1 - tz) * field[i1, j0]
            + (1 - tx) * tz * field[i0, j0 + 1]
            + tx * tz * field[i1, j0 + 1]
        )

    uu = interp(u, 0.0, 0.5 * grid.dz, grid.nz)
    ww = interp(w, 0.5 * grid.dx, 0.0, grid.nz + 1)
    return uu, ww
