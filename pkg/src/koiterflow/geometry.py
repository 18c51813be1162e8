"""Reference surfaces, the tube cutoff, the Hanzawa map and eta-dependent geometry.

Curvature convention: the unit normal ``nu`` points out of the fluid and
principal curvatures of convex surfaces are positive (sphere of radius R has
``h1 = h2 = 1/R``).  The area factor of a normal displacement is
``gamma = 1 - 2 H eta + G eta**2``.
"""

import csv
import enum
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import InvalidDisplacementError, OutOfDomainError


class SurfaceKind(str, enum.Enum):
    FLAT = "flat"
    SPHERE = "sphere"
    TORUS = "torus"


class SurfaceGeometry:
    """Analytic reference surface sampled on its parameter grid.

    Tensors are stored in the orthonormal principal frame, so the metric is
    the identity there; ``coord_metric`` keeps the coordinate components.
    ``dim`` is the surface dimension (1 for the channel top, 2 otherwise).
    """

    def __init__(self, kind, params, u, v, coord_metric, h1, h2, kappa, weights, dim, ops=None):
        self.kind = SurfaceKind(kind)
        self.params = dict(params)
        self.u = u
        self.v = v
        self.coord_metric = coord_metric
        self.h1 = np.asarray(h1, dtype=float)
        self.h2 = np.asarray(h2, dtype=float)
        self.H = 0.5 * (self.h1 + self.h2) if dim == 2 else 0.5 * self.h1
        self.G = self.h1 * self.h2 if dim == 2 else np.zeros_like(self.h1)
        self.kappa = float(kappa)
        self.weights = weights
        self.dim = dim
        self.ops = ops
        self.shape = self.h1.shape

    # constructors ---------------------------------------------------------
    @classmethod
    def flat(cls, n=64, length=2.0 * np.pi, height=1.0):
        x = spectral.periodic_grid(n, length)
        zero = np.zeros(n)
        weights = np.full(n, length / n)
        return cls(
            SurfaceKind.FLAT,
            {"n": n, "length": length, "height": height},
            x,
            zero,
            np.ones((1, 1, n)),
            zero,
            zero,
            height,
            weights,
            dim=1,
        )

    @classmethod
    def sphere(cls, radius=1.0, lmax=12):
        ops = spectral.SphereHarmonics(radius, lmax)
        th, ph = ops.TH, ops.PH
        g = np.zeros((2, 2) + ops.shape)
        g[0, 0] = radius**2
        g[1, 1] = (radius * np.sin(th)) ** 2
        h = np.full(ops.shape, 1.0 / radius)
        return cls(
            SurfaceKind.SPHERE,
            {"radius": radius, "lmax": lmax},
            th,
            ph,
            g,
            h,
            h.copy(),
            radius,
            ops.weights,
            dim=2,
            ops=ops,
        )

    @classmethod
    def torus(cls, major=2.0, minor=1.0, nu=64, nv=64):
        if not major > minor > 0:
            raise InvalidDisplacementError("torus needs major > minor > 0")
        uu = spectral.periodic_grid(nu, 2.0 * np.pi)
        vv = spectral.periodic_grid(nv, 2.0 * np.pi)
        U, V = np.meshgrid(uu, vv, indexing="ij")
        rho = major + minor * np.cos(V)
        g = np.zeros((2, 2) + U.shape)
        g[0, 0] = rho**2
        g[1, 1] = minor**2
        h1 = np.full(U.shape, 1.0 / minor)
        h2 = np.cos(V) / rho
        weights = rho * minor * (2.0 * np.pi / nu) * (2.0 * np.pi / nv)
        kappa = min(minor, major - minor)
        return cls(
            SurfaceKind.TORUS,
            {"major": major, "minor": minor, "nu": nu, "nv": nv},
            U,
            V,
            g,
            h1,
            h2,
            kappa,
            weights,
            dim=2,
        )

    # derived fields -------------------------------------------------------
    @property
    def second_form(self):
        """Principal-frame second fundamental form, shape (dim, dim, *grid)."""
        if self.dim == 1:
            return self.h1[None, None]
        out = np.zeros((2, 2) + self.shape)
        out[0, 0] = self.h1
        out[1, 1] = self.h2
        return out

    @property
    def weingarten(self):
        # orthonormal frame: index raising is trivial
        return self.second_form

    @property
    def k_tensor(self):
        h = self.second_form
        return np.einsum("ab...,bc...->ac...", h, h)

    @property
    def h_norm2(self):
        return np.einsum("ab...,ab...->...", self.second_form, self.second_form)

    @property
    def k_norm2(self):
        k = self.k_tensor
        return np.einsum("ab...,ab...->...", k, k)

    @property
    def ricci(self):
        """2 H h - k in the principal frame."""
        h = self.second_form
        return 2.0 * self.H * h - self.k_tensor

    def integrate(self, f):
        return float(np.sum(self.weights * np.asarray(f)))

    def normal(self):
        """Ambient unit normal on the grid."""
        if self.kind is SurfaceKind.FLAT:
            n = self.shape[0]
            return np.array([np.zeros(n), np.ones(n)])
        if self.kind is SurfaceKind.SPHERE:
            return self.ops.frame()[2]
        U, V = self.u, self.v
        return np.array([np.cos(V) * np.cos(U), np.cos(V) * np.sin(U), np.sin(V)])

    def points(self):
        """Ambient coordinates of the grid points of the surface."""
        if self.kind is SurfaceKind.FLAT:
            return np.array([self.u, np.full(self.shape, self.params["height"])])
        if self.kind is SurfaceKind.SPHERE:
            return self.params["radius"] * self.normal()
        R, r = self.params["major"], self.params["minor"]
        rho = R + r * np.cos(self.v)
        return np.array([rho * np.cos(self.u), rho * np.sin(self.u), r * np.sin(self.v)])

    def zeros(self):
        return np.zeros(self.shape)


def curvature_data(geom, p):
    """Curvature quantities at grid index ``p`` (int or tuple)."""
    return {
        "g": geom.coord_metric[(slice(None), slice(None)) + np.index_exp[p]],
        "h": geom.second_form[(slice(None), slice(None)) + np.index_exp[p]],
        "H": float(geom.H[p]),
        "G": float(geom.G[p]),
        "h1": float(geom.h1[p]),
        "h2": float(geom.h2[p]),
    }


def tube_radius(geom):
    return geom.kappa


def nearest_approach_radius(geom, n_search=40):
    """Numeric tube radius: inward distance at which the normal foot stops being unique.

    For every grid point q we march along the inward normal and stop at the
    first depth where some other surface sample is strictly closer than q.
    Resolution-limited; used as a cross-check of the closed form.
    """
    pts = geom.points().reshape(geom.points().shape[0], -1).T
    nus = geom.normal().reshape(pts.shape[1], -1).T
    depths = np.linspace(0.0, 2.0 * geom.kappa + 1.0, n_search * 4 + 1)[1:]
    best = np.inf
    stride = max(1, pts.shape[0] // 200)
    for i in range(0, pts.shape[0], stride):
        q, nu = pts[i], nus[i]
        for s in depths:
            if s >= best:
                break
            x = q - s * nu
            d = np.linalg.norm(pts - x, axis=1)
            if d.min() < s - 1e-9 * max(1.0, s):
                # bisect between the previous depth and s
                lo, hi = s - depths[0], s
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    xm = q - mid * nu
                    if np.linalg.norm(pts - xm, axis=1).min() < mid - 1e-12:
                        hi = mid
                    else:
                        lo = mid
                best = min(best, hi)
                break
    return best


def gamma(H, G, eta):
    return 1.0 - 2.0 * H * eta + G * eta * eta


def tau(eta, kappa):
    e = float(np.max(np.abs(eta)))
    if e >= kappa:
        return np.inf
    return 1.0 / (1.0 - e / kappa)


def gamma_field(geom, eta):
    if geom.dim == 1:
        # a curve has a single principal curvature; the area factor is 1 - h eta
        return 1.0 - geom.h1 * eta
    return gamma(geom.H, geom.G, eta)


def export_curvature_csv(geom, path):
    """Write the per-point curvature table (columns u, v, H, G, h1, h2)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", "H", "G", "h1", "h2"])
        for idx in np.ndindex(*geom.shape):
            w.writerow(
                [
                    repr(float(geom.u[idx])),
                    repr(float(geom.v[idx])),
                    repr(float(geom.H[idx])),
                    repr(float(geom.G[idx])),
                    repr(float(geom.h1[idx])),
                    repr(float(geom.h2[idx])),
                ]
            )


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """Cutoff beta on [-1, 0]: blend of the linear ramp and a quintic smoothstep.

    ``beta(t) = (1 - w) (t + 1) + w S(t + 1)`` with ``S`` the quintic
    smoothstep.  ``sup beta' = 1 + 7 w / 8`` and ``min beta' = 1 - w``.
    """

    kappa: float
    eta_max: float
    blend: float

    def value(self, t):
        y = np.clip(np.asarray(t, dtype=float) + 1.0, 0.0, 1.0)
        smooth = y**3 * (10.0 - 15.0 * y + 6.0 * y * y)
        return (1.0 - self.blend) * y + self.blend * smooth

    def d1(self, t):
        y = np.clip(np.asarray(t, dtype=float) + 1.0, 0.0, 1.0)
        return (1.0 - self.blend) + self.blend * 30.0 * y * y * (1.0 - y) ** 2

    def d2(self, t):
        y = np.clip(np.asarray(t, dtype=float) + 1.0, 0.0, 1.0)
        return self.blend * 60.0 * y * (1.0 - y) * (1.0 - 2.0 * y)

    @property
    def sup_d1(self):
        return 1.0 + 7.0 * self.blend / 8.0

    @property
    def min_d1(self):
        return 1.0 - self.blend

    @property
    def meets_safety(self):
        return self.sup_d1 <= 0.9 * self.kappa / self.eta_max + 1e-15

    def monotonicity_margin(self):
        """Lower bound of 1 + (eta/kappa) beta' over |eta| <= eta_max."""
        return 1.0 - self.eta_max / self.kappa * self.sup_d1

    def table(self, n=1001):
        t = np.linspace(-1.0, 0.0, n)
        return {"s": t, "beta": self.value(t), "dbeta": self.d1(t), "d2beta": self.d2(t)}


def build_cutoff(kappa, eta_max):
    """Steepest admissible smoothstep blend for displacements up to ``eta_max``.

    When ``0.9 kappa / eta_max < 1`` no cutoff with beta(-1)=0, beta(0)=1
    can honour the 0.9 safety margin (its mean slope is 1); the linear ramp
    is returned, which is the flattest possible and still strictly monotone.
    """
    if not (0.0 < eta_max < kappa):
        raise InvalidDisplacementError(f"need 0 < eta_max < kappa, got eta_max={eta_max}, kappa={kappa}")
    target = 0.9 * kappa / eta_max
    blend = float(np.clip((target - 1.0) * 8.0 / 7.0, 0.0, 1.0))
    return Cutoff(float(kappa), float(eta_max), blend)


# ---------------------------------------------------------------------------
# shell displacement
# ---------------------------------------------------------------------------

@dataclass
class ShellDisplacement:
    geom: SurfaceGeometry
    values: np.ndarray
    velocity: np.ndarray = None
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.geom.shape:
            raise ValueError(f"displacement shape {self.values.shape} != grid {self.geom.shape}")
        if self.velocity is None:
            self.velocity = np.zeros_like(self.values)
        sup = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if sup >= self.geom.kappa:
            raise InvalidDisplacementError(f"||eta||_inf = {sup} reaches kappa = {self.geom.kappa}")

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))


# ---------------------------------------------------------------------------
# Hanzawa map
# ---------------------------------------------------------------------------

def _solve_beta_q(eta, target, kappa, cutoff, tol=1e-14):
    """Solve s + eta beta(s/kappa) = target for s in [-kappa, 0] (vectorized)."""
    eta = np.asarray(eta, dtype=float)
    target = np.asarray(target, dtype=float)
    lo = np.full(np.broadcast(eta, target).shape, -kappa)
    hi = np.zeros_like(lo)
    s = np.clip(target - eta, -kappa, 0.0) * np.ones_like(lo)
    for _ in range(200):
        f = s + eta * cutoff.value(s / kappa) - target
        lo = np.where(f < 0, s, lo)
        hi = np.where(f > 0, s, hi)
        df = 1.0 + eta / kappa * cutoff.d1(s / kappa)
        step = f / df
        s_new = s - step
        bad = (s_new <= lo) | (s_new >= hi)
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        if np.max(np.abs(s_new - s), initial=0.0) < tol * kappa:
            s = s_new
            break
        s = s_new
    return s


class HanzawaMap:
    """Diffeomorphism of the reference domain displacing the boundary by eta.

    Supported on the flat channel (points ``(x, z)``) and the ball bounded by
    the sphere (points in R^3).  ``eta`` is given as samples on the surface
    grid and interpolated spectrally.
    """

    def __init__(self, geom, eta, cutoff=None):
        eta = np.asarray(eta, dtype=float)
        if eta.shape != geom.shape:
            raise ValueError("eta must be sampled on the surface grid")
        sup = float(np.max(np.abs(eta)))
        kappa = geom.kappa
        if sup >= kappa:
            raise InvalidDisplacementError(f"||eta||_inf = {sup} reaches kappa = {kappa}")
        if cutoff is None:
            cutoff = build_cutoff(kappa, max(sup, 1e-3 * kappa))
        self.geom = geom
        self.eta = eta
        self.cutoff = cutoff
        self.kappa = kappa
        if geom.kind is SurfaceKind.SPHERE:
            self._coeffs = geom.ops.analyze(eta)
        elif geom.kind is not SurfaceKind.FLAT:
            raise NotImplementedError("Hanzawa map is provided for the flat channel and the sphere")

    # eta and its surface gradient at arbitrary feet --------------------------
    def _eta_flat(self, x, deriv=0):
        L = self.geom.params["length"]
        return spectral.trig_eval(self.eta, L, np.mod(x, L), deriv)

    def _eta_sphere(self, xhat):
        ops = self.geom.ops
        th = np.arccos(np.clip(xhat[..., 2], -1.0, 1.0))
        ph = np.arctan2(xhat[..., 1], xhat[..., 0])
        shp = th.shape
        val = ops.evaluate(self._coeffs, th, ph).reshape(shp)
        ft = ops.evaluate(self._coeffs, th, ph, "t").reshape(shp)
        fp = ops.evaluate(self._coeffs, th, ph, "p").reshape(shp)
        e_t = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], -1)
        e_p = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], -1)
        sin = np.maximum(np.sin(th), 1e-300)
        grad_unit = ft[..., None] * e_t + (fp / sin)[..., None] * e_p
        return val, grad_unit

    # public API -------------------------------------------------------------
    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if self.geom.kind is SurfaceKind.FLAT:
            Hh = self.geom.params["height"]
            z = x[..., 1]
            if np.any(z < -1e-12) or np.any(z > Hh + 1e-12):
                raise OutOfDomainError("point outside the reference channel")
            s = z - Hh
            e = self._eta_flat(x[..., 0])
            return np.stack([x[..., 0], z + e * self.cutoff.value(s / self.kappa)], -1)
        R = self.geom.params["radius"]
        r = np.linalg.norm(x, axis=-1)
        if np.any(r > R * (1 + 1e-12)):
            raise OutOfDomainError("point outside the reference ball")
        safe = np.where(r > 0, r, 1.0)
        xhat = x / safe[..., None]
        e, _ = self._eta_sphere(xhat)
        rp = r + e * self.cutoff.value((r - R) / self.kappa)
        rp = np.where(r > 0, rp, 0.0)
        return xhat * rp[..., None]

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.geom.kind is SurfaceKind.FLAT:
            Hh = self.geom.params["height"]
            e = self._eta_flat(y[..., 0])
            z = y[..., 1]
            if np.any(z < -1e-12) or np.any(z > Hh + e + 1e-12):
                raise OutOfDomainError("point outside the deformed channel")
            s = _solve_beta_q(e, z - Hh, self.kappa, self.cutoff)
            return np.stack([y[..., 0], s + Hh], -1)
        R = self.geom.params["radius"]
        rho = np.linalg.norm(y, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        xhat = y / safe[..., None]
        e, _ = self._eta_sphere(xhat)
        if np.any(rho > R + e + 1e-12):
            raise OutOfDomainError("point outside the deformed ball")
        s = _solve_beta_q(e, rho - R, self.kappa, self.cutoff)
        return xhat * (R + s)[..., None]

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        if self.geom.kind is SurfaceKind.FLAT:
            Hh = self.geom.params["height"]
            t = (x[..., 1] - Hh) / self.kappa
            e = self._eta_flat(x[..., 0])
            de = self._eta_flat(x[..., 0], 1)
            J = np.zeros(x.shape[:-1] + (2, 2))
            J[..., 0, 0] = 1.0
            J[..., 1, 0] = de * self.cutoff.value(t)
            J[..., 1, 1] = 1.0 + e * self.cutoff.d1(t) / self.kappa
            return J
        R = self.geom.params["radius"]
        r = np.linalg.norm(x, axis=-1)
        xhat = x / r[..., None]
        e, grad_unit = self._eta_sphere(xhat)
        t = (r - R) / self.kappa
        b = self.cutoff.value(t)
        rp = r + e * b
        grad_rp = xhat * (1.0 + e * self.cutoff.d1(t) / self.kappa)[..., None] + (b / r)[..., None] * grad_unit
        eye = np.eye(3)
        proj = eye - xhat[..., :, None] * xhat[..., None, :]
        return xhat[..., :, None] * grad_rp[..., None, :] + (rp / r)[..., None, None] * proj

    def det(self, x):
        return np.linalg.det(self.jacobian(x))


# ---------------------------------------------------------------------------
# eta-dependent surface geometry
# ---------------------------------------------------------------------------

def surface_gradient_frame(geom, f):
    """Surface gradient of ``f`` in the principal orthonormal frame."""
    if geom.kind is SurfaceKind.FLAT:
        return spectral.fourier_derivative(f, geom.params["length"])[None]
    if geom.kind is SurfaceKind.SPHERE:
        return geom.ops.gradient_frame(f)
    R, r = geom.params["major"], geom.params["minor"]
    rho = R + r * np.cos(geom.v)
    fu = spectral.fourier_derivative(f, 2.0 * np.pi, axis=0)
    fv = spectral.fourier_derivative(f, 2.0 * np.pi, axis=1)
    # frame order follows (h1, h2): e_v (tube circle) then e_u (big circle)
    return np.array([fv / r, fu / rho])


def area_distortion_normal(eta, geom):
    """Normal field v_eta of the displaced surface and its normal component.

    Components are returned in the principal frame with the normal last.
    """
    eta = np.asarray(eta, dtype=float)
    if np.max(np.abs(eta)) >= geom.kappa:
        raise InvalidDisplacementError("displacement reaches the tube radius")
    grad = surface_gradient_frame(geom, eta)
    gam = gamma_field(geom, eta)
    if geom.dim == 1:
        v = np.array([-grad[0], gam])
    else:
        v = np.array(
            [
                -(1.0 - eta * geom.h2) * grad[0],
                -(1.0 - eta * geom.h1) * grad[1],
                gam,
            ]
        )
    return v, v[-1]


def surface_operators(geom, f):
    """Gradient (frame components), Hessian (frame) and Laplacian of ``f``."""
    f = np.asarray(f, dtype=float)
    if geom.kind is SurfaceKind.FLAT:
        L = geom.params["length"]
        spectral.check_resolution(f)
        d1 = spectral.fourier_derivative(f, L, 1)
        d2 = spectral.fourier_derivative(f, L, 2)
        return {"grad": d1[None], "hess": d2[None, None], "lap": d2}
    if geom.kind is SurfaceKind.SPHERE:
        ops = geom.ops
        c = ops.analyze(f)
        ops.check_band_limit(f, c)
        return {
            "grad": ops.gradient_frame(coeffs=c),
            "hess": ops.hessian_frame(coeffs=c),
            "lap": ops.synthesize(ops.laplacian_coeffs(c)),
        }
    R, r = geom.params["major"], geom.params["minor"]
    rho = R + r * np.cos(geom.v)
    tp = 2.0 * np.pi
    fu = spectral.fourier_derivative(f, tp, axis=0)
    fv = spectral.fourier_derivative(f, tp, axis=1)
    lap = (
        spectral.fourier_derivative(r / rho * fu, tp, axis=0)
        + spectral.fourier_derivative(rho / r * fv, tp, axis=1)
    ) / (r * rho)
    return {"grad": np.array([fv / r, fu / rho]), "hess": None, "lap": lap}


def commutator_residual(geom, f, return_fields=False):
    """Max-norm residual of [Delta, grad] f - (2 H h - k) grad f.

    On the sphere the rough Laplacian of the vector field grad f is computed
    from ambient components: trace Hess V = P(Delta V_amb) + V / R**2.
    """
    f = np.asarray(f, dtype=float)
    if geom.kind is SurfaceKind.FLAT:
        return 0.0
    if geom.kind is not SurfaceKind.SPHERE:
        raise NotImplementedError("commutator check needs a spectral surface (flat or sphere)")
    ops = geom.ops
    R = ops.radius
    c = ops.analyze(f)
    V = ops.gradient_ambient(coeffs=c)
    lapV = np.array([ops.laplacian(V[a]) for a in range(3)])
    _, _, nu = ops.frame()
    lapV -= nu * np.sum(nu * lapV, axis=0)
    rough = lapV + V / R**2
    grad_lap = ops.gradient_ambient(coeffs=ops.laplacian_coeffs(c))
    comm = rough - grad_lap
    # 2Hh - k on the sphere frame is (1/R^2) id
    expected = (2.0 * geom.H * geom.h1 - geom.h1**2) * V
    res = float(np.max(np.abs(comm - expected)))
    if return_fields:
        return res, comm, V
    return res
