"""Shell-fluid coupling on the periodic channel.

Contains the mean correction and divergence-free extension of boundary
data, the space-time mollifier, the regularized initial data, and the
coupled solver: a Galerkin integro-ODE stepped window by window, with a
relaxed Picard iteration making geometry and advecting velocity
self-consistent.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .errors import (
    FluxCompatibilityError,
    InvalidDisplacementError,
    InvalidParametersError,
    OrderingError,
    SolverConvergenceError,
)
from .fluid import MacGrid, StressModel, sample_mac, stokes_solve
from .forcing import ZERO, Fixture
from .geometry import SurfaceGeometry, SurfaceKind, gamma_field, tau
from .integro import cholesky_or_raise, midpoint_memory_step
from .koiter import KoiterParams, koiter_energy, plate_coefficient
from .spectral import fourier_derivative, trig_eval, wavenumbers

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# mean correction
# ---------------------------------------------------------------------------

def _param_range(geom):
    if geom.kind is SurfaceKind.FLAT:
        return geom.u, 0.0, geom.params["length"]
    if geom.kind is SurfaceKind.SPHERE:
        return geom.u, 0.0, np.pi
    return geom.u, 0.0, 2.0 * np.pi


def default_bump(geom):
    """cos^2 bump supported on a quarter of the first parameter range."""
    u, lo, hi = _param_range(geom)
    centre = 0.5 * (lo + hi)
    half = (hi - lo) / 8.0
    s = (u - centre) / half
    return np.where(np.abs(s) < 1.0, np.cos(0.5 * np.pi * s) ** 2, 0.0)


def mean_functional(b, eta, geom):
    """a(b, eta) = int b gamma(eta) dA."""
    g = gamma_field(geom, np.asarray(eta, dtype=float))
    if np.min(g) <= 0.0:
        raise InvalidDisplacementError(f"area factor gamma(eta) reaches {np.min(g):.3e}")
    return geom.integrate(np.asarray(b, dtype=float) * g)


def mean_correct(b, eta, geom, bump=None):
    """b - psi a(b, eta) / a(psi, eta): removes the gamma-weighted mean of b."""
    psi = default_bump(geom) if bump is None else np.asarray(bump, dtype=float)
    denom = mean_functional(psi, eta, geom)
    if denom <= 0.0:
        raise InvalidDisplacementError("bump has no positive weighted mass")
    return np.asarray(b, dtype=float) - psi * (mean_functional(b, eta, geom) / denom)


# ---------------------------------------------------------------------------
# divergence-free extension
# ---------------------------------------------------------------------------

@dataclass
class Extension:
    grid: MacGrid
    u: np.ndarray
    w: np.ndarray
    alpha: float
    inner_rows: int
    b: np.ndarray
    eta: np.ndarray
    length: float

    @property
    def div_max(self):
        from .fluid import mac_divergence

        return float(np.max(np.abs(mac_divergence(self.grid, self.u, self.w))))

    def sample(self, x, z):
        return sample_mac(self.grid, self.u, self.w, x, z)

    def trace_error(self, n_points=4099, seed=None):
        """RMS deviation of F b from (0, b) on the deformed boundary z = 1 + eta(x).

        The default uniform sample of a prime number of points spreads
        evenly over the cells at every resolution, so the estimate carries
        no sampling noise; a ``seed`` switches to random abscissae.
        """
        if seed is None:
            xs = (np.arange(n_points) + 1.0 / 3.0) * self.length / n_points
        else:
            xs = np.sort(np.random.default_rng(seed).uniform(0.0, self.length, n_points))
        zs = 1.0 + trig_eval(self.eta, self.length, xs)
        uu, ww = self.sample(xs, zs)
        bb = trig_eval(self.b, self.length, xs)
        return float(np.sqrt(np.mean(uu**2 + (ww - bb) ** 2)))


def extend_boundary(b, eta, geom, alpha=0.5, nx=None, nz_inner=16, mean_tol=1e-10):
    """Divergence-free lift F_eta b on the enlarged box [0, L) x [0, 1 + alpha].

    In the tube |z - 1| < alpha the normal field is constant along the
    normal (the exponential rescaling factor is 1 for a flat top); below it
    a MAC Stokes solve takes the matching trace.
    """
    if geom.kind is not SurfaceKind.FLAT:
        raise NotImplementedError("the extension operator is implemented for the flat channel")
    b = np.asarray(b, dtype=float)
    eta = np.asarray(eta, dtype=float)
    height, length = geom.params["height"], geom.params["length"]
    if not 0.0 < alpha < geom.kappa:
        raise InvalidDisplacementError(f"tube half-width alpha={alpha} must lie in (0, kappa)")
    if np.max(np.abs(eta)) >= alpha:
        raise InvalidDisplacementError(f"|eta| reaches {np.max(np.abs(eta)):.3f} >= alpha={alpha}")
    mean = mean_functional(b, eta, geom)
    if abs(mean) > mean_tol * max(1.0, float(np.max(np.abs(b)))):
        raise FluxCompatibilityError(f"int b gamma(eta) dA = {mean:.3e} does not vanish", mean)
    nx = nx or geom.params["n"]
    inner_h = height - alpha
    dz = inner_h / nz_inner
    tube_rows = 2.0 * alpha / dz
    if abs(tube_rows - round(tube_rows)) > 1e-9:
        raise ValueError("alpha must make the tube an integer number of cells")
    tube_rows = int(round(tube_rows))
    grid = MacGrid(nx, nz_inner + tube_rows, length, height + alpha)
    inner = MacGrid(nx, nz_inner, length, inner_h)
    xw = (np.arange(nx) + 0.5) * grid.dx
    bw = trig_eval(b, length, xw)
    bw = bw - bw.mean()  # removes the round-off left by interpolation
    st = stokes_solve(inner, np.zeros(nx), bw)
    u = np.zeros((nx, grid.nz))
    w = np.zeros((nx, grid.nz + 1))
    u[:, :nz_inner] = st.u
    w[:, : nz_inner + 1] = st.w
    w[:, nz_inner:] = bw[:, None]
    return Extension(grid, u, w, alpha, nz_inner, b, eta, length)


# ---------------------------------------------------------------------------
# mollifier
# ---------------------------------------------------------------------------

def _kernel_rule(n_nodes=8):
    """Nodes in (0, 1) and weights summing to one for the bump 30 s^2 (1-s)^2."""
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    s = 0.5 * (xg + 1.0)
    w = 0.5 * wg * 30.0 * s**2 * (1.0 - s) ** 2
    return s, w / w.sum()


def interp_history(times, values, tau_):
    """Piecewise-linear interpolation of node values, held constant before the first node.

    Returns (values, slopes) at the query times.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    tau_ = np.atleast_1d(np.asarray(tau_, dtype=float))
    if times.size == 1:
        v = np.repeat(values[:1], tau_.size, axis=0)
        return v, np.zeros_like(v)
    i = np.clip(np.searchsorted(times, tau_, side="right") - 1, 0, times.size - 2)
    h = times[i + 1] - times[i]
    theta = ((tau_ - times[i]) / h)[:, None]
    slope = (values[i + 1] - values[i]) / h[:, None]
    val = values[i] + theta * (values[i + 1] - values[i])
    before = tau_ < times[0]
    val[before] = values[0]
    slope[before] = 0.0
    return val, slope


class Mollifier:
    """R_eps: one-sided time average over (t - eps, t), Gaussian spatial smoothing, plus sqrt(eps).

    The spatial multiplier ``exp(-(eps k)^2)`` equals one on the mean mode,
    so constants only pick up the shift.
    """

    def __init__(self, eps, length=2.0 * np.pi, n_nodes=8, spatial=True):
        if not eps > 0:
            raise InvalidParametersError("eps must be positive")
        self.eps = float(eps)
        self.length = float(length)
        self.nodes, self.weights = _kernel_rule(n_nodes)
        self.shift = np.sqrt(self.eps)
        self.spatial = spatial

    def smooth(self, f):
        f = np.asarray(f, dtype=float)
        if not self.spatial:
            return f.copy()
        k = wavenumbers(f.shape[-1], self.length)
        mult = np.exp(-((self.eps * k) ** 2))
        mult[0] = 1.0
        return np.real(np.fft.ifft(np.fft.fft(f, axis=-1) * mult, axis=-1))

    def static(self, f):
        """R_eps of a field held constant in time."""
        return self.smooth(f) + self.shift

    def time_average(self, times, values, t):
        """(value, time derivative) of the one-sided time average at t."""
        v, dv = interp_history(times, values, t - self.eps * self.nodes)
        return self.weights @ v, self.weights @ dv

    def history(self, times, values, t):
        """(R_eps delta(t), d/dt R_eps delta(t)) for a node history of shell fields."""
        v, dv = self.time_average(times, values, t)
        return self.smooth(v) + self.shift, self.smooth(dv)


def mollify(field_, eps, length=2.0 * np.pi, times=None, t=None):
    """R_eps of a shell field; with ``times`` given, ``field_`` is a node history evaluated at ``t``."""
    m = Mollifier(eps, length)
    if times is None:
        return m.static(field_)
    return m.history(times, field_, t)[0]


def holder_fixture(n=1024, amplitude=10.0, exponent=0.75, length=2.0 * np.pi):
    """Displacement a |sin(pi x / L)|^s: two Hoelder cusps of exponent s per period."""
    x = np.arange(n) * length / n
    return amplitude * np.abs(np.sin(np.pi * x / length)) ** exponent


def ordering_margin(eta0, eps, length=2.0 * np.pi):
    """min (R_eps eta0 - eta0); nonnegative exactly when the ordering holds."""
    return float(np.min(Mollifier(eps, length).static(eta0) - eta0))


def ordering_threshold(eta0, length=2.0 * np.pi, eps_hi=1.0, eps_lo=1e-6, rtol=1e-3):
    """Largest eps (bisected in log scale) below which R_eps eta0 >= eta0 was found to hold.

    Returns ``eps_hi`` when the ordering already holds there.
    """
    if ordering_margin(eta0, eps_hi, length) >= 0:
        return eps_hi
    if ordering_margin(eta0, eps_lo, length) < 0:
        return 0.0
    lo, hi = np.log(eps_lo), np.log(eps_hi)
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if ordering_margin(eta0, np.exp(mid), length) >= 0:
            lo = mid
        else:
            hi = mid
    return float(np.exp(lo))


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _invert_height(basis, d_at_x, z):
    """Reference height zhat with zhat + d b(zhat) = z (b increasing)."""
    cut = basis.cutoff
    lo = np.zeros_like(z)
    hi = np.ones_like(z)
    if cut.blend == 0.0:
        return z / (1.0 + d_at_x)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = mid + d_at_x * cut.value(mid - 1.0)
        lo = np.where(val < z, mid, lo)
        hi = np.where(val < z, hi, mid)
    return 0.5 * (lo + hi)


def stokes_initial_velocity(basis, eta0, eta1):
    """Velocity on the domain over eta0: the Stokes lift of eta1 pushed forward by Psi_eta0."""
    coeffs = basis.shell_coefficients(eta1)
    geo = ch.ChannelGeometry(np.asarray(eta0, dtype=float), np.zeros(basis.nx))

    def u0(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        shape = x.shape
        xf, zf = x.ravel(), z.ravel()
        d = trig_eval(geo.d, basis.length, xf)
        zhat = _invert_height(basis, d, zf)
        F = ch.mode_fields(basis, geo, need_grad=False, points=(xf, zhat))
        return np.einsum("k,kip->ip", coeffs, F.W).reshape((2,) + shape)

    return u0


@dataclass
class InitialData:
    u0: object
    u0_eps: object
    eta0: np.ndarray
    eta1: np.ndarray
    eta1_eps: np.ndarray
    r_eta0: np.ndarray
    length: float

    def l2_gap(self, n_quad=16):
        """Discrete L2 distance of (u0_eps, eta1_eps) from (u0, eta1), u0 extended by zero.

        Below the original interface both fields coincide, so only the gap
        between eta0 and R eta0 contributes.
        """
        n = self.eta0.size
        x = np.arange(n) * self.length / n
        zg, wg = np.polynomial.legendre.leggauss(n_quad)
        lo = 1.0 + self.eta0
        hi = 1.0 + self.r_eta0
        zz = lo[:, None] + (hi - lo)[:, None] * 0.5 * (zg + 1.0)[None, :]
        ww = (hi - lo)[:, None] * 0.5 * wg[None, :] * (self.length / n)
        xx = np.repeat(x[:, None], n_quad, axis=1)
        ue = self.u0_eps(xx, zz)
        gap = float(np.sum(ww * (ue[0] ** 2 + ue[1] ** 2)))
        shell = float(np.sum((self.eta1_eps - self.eta1) ** 2) * self.length / n)
        return np.sqrt(gap + shell)


def prepare_initial_data(u0, eta0, eta1, eps, geom, basis=None):
    """Regularized initial data on the domain over R_eps eta0.

    ``u0`` is a callable (x, z) -> (2, ...) on the domain over eta0, or None
    for the Stokes lift of eta1 (which needs ``basis``).
    """
    if geom.kind is not SurfaceKind.FLAT:
        raise NotImplementedError("initial-data regularization is implemented for the flat channel")
    eta0 = np.asarray(eta0, dtype=float)
    eta1 = np.asarray(eta1, dtype=float)
    length = geom.params["length"]
    flux = mean_functional(eta1, eta0, geom)
    if abs(flux) > 1e-10 * max(1.0, float(np.max(np.abs(eta1)))):
        raise FluxCompatibilityError(f"normal trace of u0 carries net flux {flux:.3e}", flux)
    moll = Mollifier(eps, length)
    r_eta0 = moll.static(eta0)
    if np.any(r_eta0 < eta0):
        bad = float(np.min(r_eta0 - eta0))
        raise OrderingError(f"R_eps eta0 falls below eta0 by {-bad:.3e}; decrease eps")
    # flat top: the normal-divergence exponent vanishes, so the factor is one
    eta1_eps = eta1.copy()
    if u0 is None:
        if basis is None:
            raise ValueError("a Galerkin basis is needed to build the default initial velocity")
        u0 = stokes_initial_velocity(basis, eta0, eta1)

    def u0_eps(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        top = 1.0 + trig_eval(eta0, length, x.ravel()).reshape(x.shape)
        inside = z <= top
        out = np.zeros((2,) + x.shape)
        if np.any(inside):
            out[:, inside] = u0(x[inside], z[inside])
        outside = ~inside
        if np.any(outside):
            out[1, outside] = trig_eval(eta1_eps, length, x[outside])
        return out

    return InitialData(u0, u0_eps, eta0, eta1, eta1_eps, r_eta0, length)


# ---------------------------------------------------------------------------
# coupled solver
# ---------------------------------------------------------------------------

@dataclass
class CouplingConfig:
    eps_reg: float = 1e-4
    omega_relax: float = 1.0
    tol_eta: float = 1e-8
    tol_u: float = 1e-8
    max_outer: int = 30
    theta_contact: float = 0.95
    window_steps: int = 10

    def __post_init__(self):
        if not self.eps_reg > 0:
            raise InvalidParametersError("eps_reg must be positive")
        if not 0.0 < self.omega_relax <= 1.0:
            raise InvalidParametersError("omega_relax must lie in (0, 1]")
        if not (self.tol_eta > 0 and self.tol_u > 0):
            raise InvalidParametersError("fixed-point tolerances must be positive")
        if not 0.0 < self.theta_contact < 1.0:
            raise InvalidParametersError("theta_contact must lie in (0, 1)")
        if self.max_outer < 1 or self.window_steps < 1:
            raise InvalidParametersError("max_outer and window_steps must be >= 1")


@dataclass
class CoupledProblem:
    basis: ch.ChannelBasis
    koiter: KoiterParams = field(default_factory=KoiterParams)
    stress: StressModel = field(default_factory=StressModel)
    eps_damp: float = 0.0
    eta0: np.ndarray = None
    eta1: np.ndarray = None
    u0: object = None
    f: Fixture = ZERO
    g: Fixture = ZERO
    dt: float = 1e-3

    def __post_init__(self):
        nx = self.basis.nx
        self.eta0 = np.zeros(nx) if self.eta0 is None else np.asarray(self.eta0, dtype=float)
        self.eta1 = np.zeros(nx) if self.eta1 is None else np.asarray(self.eta1, dtype=float)
        if not self.dt > 0:
            raise InvalidParametersError("dt must be positive")
        if self.eps_damp < 0:
            raise InvalidParametersError("eps_damp must be nonnegative")


LEDGER_COLUMNS = (
    "t",
    "E_kin_fluid",
    "E_kin_shell",
    "E_elastic",
    "D_visc_cum",
    "D_damp_cum",
    "W_ext_cum",
    "residual",
    "eta_inf",
    "gamma_min",
    "tau_eta",
    "korn_gap",
)
# extra cumulative quantities kept for the Gronwall monitor
EXTRA_COLUMNS = ("grad_cum", "force_cum")


@dataclass
class WindowResult:
    times: np.ndarray
    alpha: np.ndarray  # (m+1, n) including the start node
    zeta: np.ndarray
    eta: np.ndarray
    A_fluid: list
    steps: list  # per-step dicts


@dataclass
class RunState:
    times: list
    eta: list
    alpha: list
    zeta: list
    ledger: list  # rows aligned with LEDGER_COLUMNS + EXTRA_COLUMNS
    A_fluid_last: np.ndarray
    fp_log: list = field(default_factory=list)
    min_eig: float = float("inf")
    stop_reason: str = None
    T_star: float = None
    step: int = 0

    def arrays(self):
        return np.array(self.times), np.array(self.eta), np.array(self.alpha), np.array(self.zeta)


@dataclass
class RunResult:
    times: np.ndarray
    eta: np.ndarray
    alpha: np.ndarray
    ledger: np.ndarray
    stop_reason: str
    T_star: float
    fp_log: list
    min_eig: float

    def column(self, name):
        cols = LEDGER_COLUMNS + EXTRA_COLUMNS
        return self.ledger[:, cols.index(name)]

    @property
    def max_outer_iterations(self):
        return max((w["iterations"] for w in self.fp_log), default=0)


class CoupledSolver:
    """Regularized shell-fluid system on the periodic channel."""

    def __init__(self, problem, config=None):
        self.problem = problem
        self.config = config or CouplingConfig()
        cfg, pb = self.config, problem
        self.basis = pb.basis
        self.kappa = 1.0
        self.flat = SurfaceGeometry.flat(n=self.basis.nx, length=self.basis.length)
        self.moll = Mollifier(cfg.eps_reg, self.basis.length)
        self.kel = self.basis.elastic_matrix(pb.koiter)
        self.shell_mass = pb.koiter.rho_s * self.basis.shell_mass
        cb = plate_coefficient(pb.koiter)
        eta0_xx = fourier_derivative(pb.eta0, self.basis.length, 2)
        self.k_eta0 = cb * (self.basis.Y2 * self.basis.wx) @ eta0_xx
        if np.max(np.abs(pb.eta0)) >= cfg.theta_contact * self.kappa:
            raise InvalidDisplacementError("initial displacement already at the contact threshold")
        self.init = prepare_initial_data(pb.u0, pb.eta0, pb.eta1, cfg.eps_reg, self.flat, self.basis)

    # geometry ------------------------------------------------------------
    def geometry(self, times, eta_hist, t):
        d, d_t = self.moll.history(times, eta_hist, t)
        return ch.ChannelGeometry(d, d_t)

    def mollified_velocity(self, times, alpha_hist, t):
        return self.moll.time_average(times, alpha_hist, t)[0]

    # initial state -------------------------------------------------------
    def initial_alpha(self):
        basis = self.basis
        geo = ch.ChannelGeometry(self.init.r_eta0, np.zeros(basis.nx))
        F = ch.mode_fields(basis, geo, need_grad=False)
        A_f = ch.mass_matrix(basis, F)
        A = A_f + self.shell_mass
        u = self.init.u0_eps(F.points[0], F.points[1])
        wJ = basis.weights * F.J
        rhs = np.einsum("kip,ip->k", F.W, u * wJ) + self.problem.koiter.rho_s * (basis.Y * basis.wx) @ self.init.eta1_eps
        cholesky_or_raise(A, 0.0)
        return np.linalg.solve(A, rhs), A_f

    def initial_state(self):
        a0, A_f = self.initial_alpha()
        n = self.basis.n
        st = RunState([0.0], [self.problem.eta0.copy()], [a0], [np.zeros(n)], [], A_f)
        st.ledger.append(self._row(0.0, a0, A_f, self.problem.eta0, None, None))
        return st

    # ledger --------------------------------------------------------------
    def _energies(self, a, A_f, eta):
        e_f = 0.5 * float(a @ A_f @ a)
        e_s = 0.5 * float(a @ self.shell_mass @ a)
        e_el = koiter_energy(eta, self.flat, self.problem.koiter)
        return e_f, e_s, e_el

    def _row(self, t, a, A_f, eta, prev, step):
        e_f, e_s, e_el = self._energies(a, A_f, eta)
        if prev is None:
            cum = dict(D_visc=0.0, D_damp=0.0, W_ext=0.0, grad=0.0, force=0.0)
            e0 = e_f + e_s + e_el
            korn = 0.0
        else:
            c = LEDGER_COLUMNS + EXTRA_COLUMNS
            first = self._first_row
            e0 = first[1] + first[2] + first[3]
            cum = dict(
                D_visc=prev[c.index("D_visc_cum")] + step["diss"],
                D_damp=prev[c.index("D_damp_cum")] + step["damp"],
                W_ext=prev[c.index("W_ext_cum")] + step["work"],
                grad=prev[c.index("grad_cum")] + step["grad"],
                force=prev[c.index("force_cum")] + step["force"],
            )
            korn = step["korn"]
        residual = (e_f + e_s + e_el) - e0 + cum["D_visc"] + cum["D_damp"] - cum["W_ext"]
        r_eta = self.moll.static(eta)
        row = np.array([
            t, e_f, e_s, e_el, cum["D_visc"], cum["D_damp"], cum["W_ext"], residual,
            float(np.max(np.abs(eta))), float(np.min(gamma_field(self.flat, r_eta))),
            tau(eta, self.kappa), korn, cum["grad"], cum["force"],
        ])
        if prev is None:
            self._first_row = row
        return row

    # decoupled solve -----------------------------------------------------
    def decoupled(self, hist_t, hist_eta, hist_alpha, start, delta_nodes, v_nodes, zeta0, A_f0):
        """Solve the linear Galerkin system over one window for given (delta, v).

        ``hist_*`` hold the accepted history up to and including node
        ``start``; ``delta_nodes`` and ``v_nodes`` (m+1 rows, first row the
        start node) prescribe the geometry and the advecting velocity.
        """
        pb, basis, dt = self.problem, self.basis, self.problem.dt
        m = delta_nodes.shape[0] - 1
        t0 = hist_t[-1]
        win_t = t0 + dt * np.arange(m + 1)
        keep = max(0, len(hist_t) - 2 - int(np.ceil(self.config.eps_reg / dt)))
        times = np.concatenate([hist_t[keep:-1], win_t])
        eta_h = np.concatenate([hist_eta[keep:-1], delta_nodes])
        v_h = np.concatenate([hist_alpha[keep:-1], v_nodes])
        alpha = np.zeros((m + 1, basis.n))
        zeta = np.zeros((m + 1, basis.n))
        eta = np.zeros((m + 1, basis.nx))
        alpha[0] = v_nodes[0]
        zeta[0] = zeta0
        eta[0] = delta_nodes[0]
        A_nodes = [A_f0]
        steps = []
        newtonian = pb.stress.kind == "newtonian"
        for j in range(m):
            tm = win_t[j] + 0.5 * dt
            geo = self.geometry(times, eta_h, tm)
            r = self.mollified_velocity(times, v_h, tm)
            vm = None if newtonian else interp_history(times, v_h, [tm])[0][0]
            asm = ch.assemble(basis, geo, adv_coeffs=r, stress=pb.stress, visc_coeffs=vm,
                              f=pb.f, g=pb.g, t=tm, rho_s=pb.koiter.rho_s)
            # node-averaged mass and its difference quotient: the discrete energy
            # identity then holds to O(dt^3) per step even when the
            # regularized geometry varies on the scale eps < dt
            geo1 = self.geometry(times, eta_h, win_t[j + 1])
            A1 = ch.mass_matrix(basis, ch.mode_fields(basis, geo1, need_grad=False))
            A = 0.5 * (A_nodes[j] + A1) + asm.A_shell
            A_dot = (A1 - A_nodes[j]) / dt
            min_eig = ch.check_spd(A, tm)
            Bm = -(0.5 * A_dot + asm.S + asm.N + asm.V + pb.eps_damp * self.kel)
            D = asm.forcing - self.k_eta0
            a1, z1 = midpoint_memory_step(A, Bm, -self.kel, D, alpha[j], zeta[j], dt)
            alpha[j + 1], zeta[j + 1] = a1, z1
            eta[j + 1] = pb.eta0 + basis.shell_field(z1)
            am = 0.5 * (alpha[j] + a1)
            A_nodes.append(A1)
            gg = float(am @ asm.GG @ am)
            dd = float(am @ asm.DD @ am)
            steps.append(dict(
                diss=dt * float(am @ asm.V @ am),
                damp=dt * pb.eps_damp * float(am @ self.kel @ am),
                work=dt * float(asm.forcing @ am),
                grad=dt * gg,
                force=dt * (asm.f_norm2 + asm.g_norm2),
                korn=abs(dd - gg) / gg if gg > 0 else 0.0,
                min_eig=min_eig,
            ))
        return WindowResult(win_t, alpha, zeta, eta, A_nodes, steps)

    # fixed point ---------------------------------------------------------
    def _guess(self, st, m):
        e = np.array(st.eta[-1])
        a = np.array(st.alpha[-1])
        j = np.arange(m + 1)[:, None]
        if len(st.eta) >= 2:
            de = e - st.eta[-2]
            da = a - st.alpha[-2]
        else:
            de = np.zeros_like(e)
            da = np.zeros_like(a)
        return e[None] + j * de[None], a[None] + j * da[None]

    def fixed_point_window(self, st, m):
        cfg = self.config
        hist_t = np.array(st.times[-(int(np.ceil(cfg.eps_reg / self.problem.dt)) + 3):])
        k = len(hist_t)
        hist_eta = np.array(st.eta[-k:])
        hist_alpha = np.array(st.alpha[-k:])
        delta, v = self._guess(st, m)
        history = []
        for it in range(1, cfg.max_outer + 1):
            out = self.decoupled(hist_t, hist_eta, hist_alpha, st.step, delta, v, st.zeta[-1], st.A_fluid_last)
            r_eta = float(np.max(np.abs(out.eta - delta)))
            diff = out.alpha - v
            r_u = max(float(np.sqrt(max(d @ (A + self.shell_mass) @ d, 0.0))) for d, A in zip(diff, out.A_fluid))
            history.append((r_eta, r_u))
            if r_eta <= cfg.tol_eta and r_u <= cfg.tol_u:
                return out, it, history
            w = cfg.omega_relax
            delta = delta + w * (out.eta - delta)
            v = v + w * (out.alpha - v)
        raise SolverConvergenceError(
            f"fixed point not reached in {cfg.max_outer} iterations at t={st.times[-1]:.4g}",
            [h[0] for h in history],
        )

    def _accept(self, st, out, iterations, history):
        for j, step in enumerate(out.steps):
            t1 = float(out.times[j + 1])
            st.times.append(t1)
            st.eta.append(out.eta[j + 1])
            st.alpha.append(out.alpha[j + 1])
            st.zeta.append(out.zeta[j + 1])
            st.ledger.append(self._row(t1, out.alpha[j + 1], out.A_fluid[j + 1], out.eta[j + 1], st.ledger[-1], step))
            st.min_eig = min(st.min_eig, step["min_eig"])
            st.step += 1
        st.A_fluid_last = out.A_fluid[-1]
        st.fp_log.append({"t_start": float(out.times[0]), "steps": len(out.steps), "iterations": iterations,
                          "residuals": [list(h) for h in history]})

    def _contact_step(self, out):
        lim = self.config.theta_contact * self.kappa
        for j in range(1, out.eta.shape[0]):
            if np.max(np.abs(out.eta[j])) >= lim:
                return j
        return None

    def advance(self, st, T_max):
        """Advance ``st`` in place until T_max or contact; returns the stop reason."""
        cfg, dt = self.config, self.problem.dt
        total = int(round(T_max / dt))
        while st.step < total:
            m = min(cfg.window_steps, total - st.step)
            try:
                out, it, hist = self.fixed_point_window(st, m)
                hit = self._contact_step(out)
            except InvalidDisplacementError:
                if m == 1:
                    raise
                out, hit = None, 0
            if hit is None:
                self._accept(st, out, it, hist)
                continue
            # redo the window one step at a time to locate the first crossing
            for _ in range(m):
                try:
                    out1, it1, hist1 = self.fixed_point_window(st, 1)
                except InvalidDisplacementError:
                    st.stop_reason, st.T_star = "contact", st.times[-1]
                    return st.stop_reason
                self._accept(st, out1, it1, hist1)
                if self._contact_step(out1) is not None:
                    st.stop_reason, st.T_star = "contact", st.times[-1]
                    return st.stop_reason
        st.stop_reason = "horizon"
        st.T_star = None
        return st.stop_reason

    def result(self, st):
        t, eta, alpha, _ = st.arrays()
        return RunResult(t, eta, alpha, np.array(st.ledger), st.stop_reason, st.T_star, st.fp_log, st.min_eig)

    # convenience -----------------------------------------------------------
    def trace_defect(self, st, index=-1):
        """max |u - (d eta / dt) e_z| on the shell for an accepted node."""
        times, eta, alpha, _ = st.arrays()
        t = times[index]
        geo = self.geometry(times, eta, t)
        x = self.basis.x
        F = ch.mode_fields(self.basis, geo, need_grad=False, points=(x, np.ones_like(x)))
        u = np.einsum("k,kip->ip", alpha[index], F.W)
        eta_t = self.basis.shell_field(alpha[index])
        return float(max(np.max(np.abs(u[0])), np.max(np.abs(u[1] - eta_t))))


def config_hash(payload):
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def decoupled_solve(solver, delta, v, T=None):
    """One decoupled solve from t = 0 with prescribed displacement and velocity node histories."""
    st = solver.initial_state()
    delta = np.asarray(delta, dtype=float)
    v = np.asarray(v, dtype=float)
    m = delta.shape[0] - 1 if T is None else int(round(T / solver.problem.dt))
    hist_t = np.array(st.times)
    out = solver.decoupled(hist_t, np.array(st.eta), np.array(st.alpha), 0, delta[: m + 1], v[: m + 1],
                           st.zeta[-1], st.A_fluid_last)
    return out


def fixed_point_solve(solver, T):
    """Self-consistent solve on [0, T]; returns (RunResult, max outer iterations)."""
    res = advance_until(solver, T)
    return res, res.max_outer_iterations


def advance_until(solver, T_max, state=None):
    st = state or solver.initial_state()
    solver.advance(st, T_max)
    return solver.result(st)
