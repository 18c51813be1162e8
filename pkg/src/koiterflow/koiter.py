"""Linear Koiter shell energy for normal displacements and its L2 gradient."""

import json
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import InvalidParametersError
from .geometry import SurfaceKind, surface_operators


@dataclass(frozen=True)
class KoiterParams:
    eps0: float = 1.0
    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    rho_s: float = 1.0

    def __post_init__(self):
        if self.lame_lambda + 2.0 * self.lame_mu == 0.0:
            raise InvalidParametersError("lambda + 2 mu must not vanish")
        if not self.lame_mu > 0.0:
            raise InvalidParametersError("lame_mu must be positive")
        if self.lame_lambda < 0.0:
            raise InvalidParametersError("lame_lambda must be nonnegative")
        if not self.eps0 > 0.0:
            raise InvalidParametersError("eps0 must be positive")

    @property
    def trace_coeff(self):
        """4 lambda mu / (lambda + 2 mu)."""
        lam, mu = self.lame_lambda, self.lame_mu
        return 4.0 * lam * mu / (lam + 2.0 * mu)

    @property
    def plate(self):
        return plate_coefficient(self)


def plate_coefficient(params):
    lam, mu, e = params.lame_lambda, params.lame_mu, params.eps0
    if lam + 2.0 * mu == 0.0:
        raise InvalidParametersError("lambda + 2 mu must not vanish")
    return e**3 * 8.0 * mu * (lam + mu) / (3.0 * (lam + 2.0 * mu))


@dataclass
class KoiterForms:
    sigma: np.ndarray
    xi: np.ndarray


def koiter_forms(eta, geom):
    """Linearized change of metric (sigma) and of curvature (xi)."""
    eta = np.asarray(eta, dtype=float)
    ops = surface_operators(geom, eta)
    h = geom.second_form
    k = geom.k_tensor
    sigma = -h * eta
    xi = ops["hess"] - k * eta
    return KoiterForms(sigma, xi)


def _tr(t):
    return np.einsum("aa...->...", t)


def _dot(a, b):
    return np.einsum("ab...,ab...->...", a, b)


def koiter_terms(eta, zeta, geom, params):
    """Membrane, bending-trace and bending-full parts of K(eta, zeta)."""
    fe = koiter_forms(eta, geom)
    fz = fe if zeta is eta else koiter_forms(zeta, geom)
    a, mu, e = params.trace_coeff, params.lame_mu, params.eps0
    membrane = 0.5 * e * geom.integrate(a * (_tr(fe.sigma) * _tr(fz.sigma)) + 4.0 * mu * _dot(fe.sigma, fz.sigma))
    bend_trace = 0.5 * e**3 / 3.0 * geom.integrate(a * (_tr(fe.xi) * _tr(fz.xi)))
    bend_full = 0.5 * e**3 / 3.0 * geom.integrate(4.0 * mu * _dot(fe.xi, fz.xi))
    return {"membrane": membrane, "bending_trace": bend_trace, "bending_full": bend_full}


def koiter_bilinear(eta, zeta, geom, params):
    t = koiter_terms(eta, zeta, geom, params)
    return t["membrane"] + t["bending_trace"] + t["bending_full"]


def koiter_energy(eta, geom, params):
    return koiter_bilinear(eta, eta, geom, params)


def energy_breakdown_json(eta, geom, params, path=None):
    t = koiter_terms(eta, eta, geom, params)
    t["total"] = t["membrane"] + t["bending_trace"] + t["bending_full"]
    text = json.dumps(t, indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return t


class _ScalarOps:
    """Scalar surface operators needed by the gradient formula."""

    def __init__(self, geom):
        self.geom = geom
        if geom.kind is SurfaceKind.FLAT:
            self.L = geom.params["length"]
        elif geom.kind is not SurfaceKind.SPHERE:
            raise NotImplementedError("the Koiter gradient needs a spectral surface (flat or sphere)")

    def lap(self, f):
        if self.geom.kind is SurfaceKind.FLAT:
            return spectral.fourier_derivative(f, self.L, 2)
        return self.geom.ops.laplacian(f)

    def div_ricci_grad(self, f):
        # div((2Hh - k) grad f); the sphere's Ricci tensor is isotropic (1/R^2) g
        if self.geom.kind is SurfaceKind.FLAT:
            return np.zeros_like(f)
        c2 = 1.0 / self.geom.params["radius"] ** 2
        return c2 * self.lap(f)

    def hess_dot_k(self, f):
        if self.geom.kind is SurfaceKind.FLAT:
            return np.zeros_like(f)
        c2 = 1.0 / self.geom.params["radius"] ** 2
        return c2 * self.lap(f)

    def divdiv_k(self, f):
        if self.geom.kind is SurfaceKind.FLAT:
            return np.zeros_like(f)
        c2 = 1.0 / self.geom.params["radius"] ** 2
        return c2 * self.lap(f)


def koiter_gradient(eta, geom, params):
    """L2 gradient of K: the field g with  int g zeta dA = 2 K(eta, zeta).

    Assembled from scalar operators only (no pointwise Hessians), so it is an
    independent route to the bilinear form.
    """
    eta = np.asarray(eta, dtype=float)
    ops = _ScalarOps(geom)
    a, mu, e = params.trace_coeff, params.lame_mu, params.eps0
    H, hh, kk = geom.H, geom.h_norm2, geom.k_norm2
    lap = ops.lap(eta)
    bilap = ops.lap(lap)
    membrane = e * (4.0 * a * H**2 + 4.0 * mu * hh) * eta
    trace = bilap - hh * lap - ops.lap(hh * eta) + hh**2 * eta
    full = bilap + ops.div_ricci_grad(eta) - ops.hess_dot_k(eta) - ops.divdiv_k(eta) + kk * eta
    return membrane + e**3 / 3.0 * (a * trace + 4.0 * mu * full)


def damped_shell_form(eta, eta_t, b, eps_damp, geom, params):
    """2 K(eta + eps_damp * eta_t, b)."""
    if eps_damp < 0:
        raise InvalidParametersError("eps_damp must be nonnegative")
    return 2.0 * koiter_bilinear(np.asarray(eta) + eps_damp * np.asarray(eta_t), b, geom, params)
