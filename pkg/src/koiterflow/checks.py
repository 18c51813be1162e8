"""Property suites run by ``koiterflow check <suite>``.

Each suite returns a list of ``CheckResult``; a suite passes when every
entry does.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    measured: float
    tolerance: float
    relation: str = "<="

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.suite}: {self.name}  measured={self.measured:.3e} {self.relation} {self.tolerance:.3e}"


def _le(suite, name, measured, tol):
    return CheckResult(suite, name, bool(measured <= tol), float(measured), float(tol), "<=")


def _ge(suite, name, measured, tol):
    return CheckResult(suite, name, bool(measured >= tol), float(measured), float(tol), ">=")


def _random_band_field(rng, geom, lmax=6, scale=1.0):
    ops = geom.ops
    f = np.zeros_like(ops.harmonic(0, 0))
    for l in range(1, lmax + 1):
        for m in range(-l, l + 1):
            f = f + rng.standard_normal() * ops.harmonic(l, m) / (1.0 + l) ** 2
    return scale * f


def _random_trig(rng, x, kmax=6):
    f = np.zeros_like(x)
    for k in range(1, kmax + 1):
        a, b = rng.standard_normal(2) / k**2
        f = f + a * np.cos(k * x) + b * np.sin(k * x)
    return f


def suite_gamma(seed=0):
    from .geometry import SurfaceGeometry, gamma, gamma_field

    rng = np.random.default_rng(seed)
    h1, h2 = rng.uniform(-3, 3, (2, 10_000))
    eta = rng.uniform(-1, 1, 10_000)
    err = np.max(np.abs(gamma(0.5 * (h1 + h2), h1 * h2, eta) - (1 - h1 * eta) * (1 - h2 * eta)))
    out = [_le("gamma", "product identity over 1e4 samples", err, 1e-12)]
    for geom in (SurfaceGeometry.sphere(1.0, 12), SurfaceGeometry.torus(2.0, 1.0, 48, 48)):
        worst = np.inf
        for _ in range(10):
            f = rng.standard_normal(geom.H.shape)
            f = 0.99 * geom.kappa * f / np.max(np.abs(f))
            worst = min(worst, float(np.min(gamma_field(geom, f))))
        out.append(_ge("gamma", f"gamma > 0 at 0.99 kappa on {geom.kind.value}", worst, np.finfo(float).tiny))
    return out


def suite_commutator(seed=0):
    from .geometry import SurfaceGeometry, commutator_residual

    out = []
    for R in (1.0, 2.0):
        geom = SurfaceGeometry.sphere(R, 12)
        worst = 0.0
        for l in range(1, 9):
            for m in range(-l, l + 1):
                worst = max(worst, commutator_residual(geom, geom.ops.harmonic(l, m)))
        out.append(_le("commutator", f"[Lap, grad] Y_l - grad Y_l / R^2, l <= 8, R = {R:g}", worst, 1e-8))
    return out


def suite_koiter_duality(seed=0):
    from .geometry import SurfaceGeometry
    from .koiter import KoiterParams, koiter_bilinear, koiter_gradient, plate_coefficient

    rng = np.random.default_rng(seed)
    params = KoiterParams()
    out = []
    sphere = SurfaceGeometry.sphere(1.0, 12)
    flat = SurfaceGeometry.flat(n=64)
    for geom in (sphere, flat):
        worst = 0.0
        for _ in range(20):
            if geom is sphere:
                eta, zeta = _random_band_field(rng, geom), _random_band_field(rng, geom)
            else:
                eta, zeta = _random_trig(rng, geom.u), _random_trig(rng, geom.u)
            lhs = geom.integrate(koiter_gradient(eta, geom, params) * zeta)
            rhs = 2.0 * koiter_bilinear(eta, zeta, geom, params)
            scale = np.sqrt(geom.integrate(eta**2) * geom.integrate(zeta**2))
            worst = max(worst, abs(lhs - rhs) / scale)
        out.append(_le("koiter-duality", f"int grad K(eta) zeta = 2 K(eta, zeta) on {geom.kind.value}", worst, 1e-8))
    cb = plate_coefficient(params)
    worst = 0.0
    for k in range(1, 9):
        mode = np.cos(k * flat.u)
        sym = flat.integrate(koiter_gradient(mode, flat, params) * mode) / flat.integrate(mode**2)
        worst = max(worst, abs(sym / (cb * k**4) - 1.0))
    out.append(_le("koiter-duality", "flat symbol equals c_B k^4", worst, 1e-10))
    return out


def suite_korn(seed=0):
    from . import diagnostics as dg

    fields = [(1, dg.normal_trace_profile(1.0, 0.0), "cos"), (2, dg.normal_trace_profile(0.5, 2.0), "sin"),
              (3, dg.normal_trace_profile(2.0, -1.0), "cos"), (1, dg.normal_trace_profile(-1.0, 3.0), "sin"),
              (4, dg.normal_trace_profile(0.3, 0.7), "cos")]
    worst = max(dg.korn_check(dg.channel_sample(dg.streamfunction_field(k, z, par))) for k, z, par in fields)
    neg = dg.korn_check(dg.channel_sample(dg.streamfunction_field(1, dg.slip_profile(1.0))))
    return [_le("korn", "gap for 5 normal-trace fields", worst, 1e-8),
            _ge("korn", "gap for the tangential-slip control", neg, 1e-2)]


def suite_cosh(seed=0):
    from .integro import cosh_oracle, observed_order

    err = cosh_oracle(1e-3, 1.0)
    errs = [cosh_oracle(dt, 1.0) for dt in (4e-3, 2e-3, 1e-3)]
    order = float(np.min(observed_order(errs)))
    return [_le("cosh", "relative error at t = 1, dt = 1e-3", err, 1e-6),
            _ge("cosh", "observed order under dt halving", order, 1.9)]


def suite_extension(seed=0, n_traces=10, levels=(8, 16, 32)):
    from .coupling import extend_boundary, mean_correct
    from .errors import FluxCompatibilityError
    from .geometry import SurfaceGeometry

    rng = np.random.default_rng(seed)
    geom = SurfaceGeometry.flat(n=64)
    x = geom.u
    div, order = 0.0, np.inf
    for _ in range(n_traces):
        eta = _random_trig(rng, x, 3)
        eta = 0.4 * eta / np.max(np.abs(eta)) * rng.uniform(0.5, 0.99)
        b = mean_correct(_random_trig(rng, x, 4) + rng.standard_normal(), eta, geom)
        errs = []
        for nz in levels:
            ext = extend_boundary(b, eta, geom, alpha=0.5, nx=4 * nz, nz_inner=nz)
            div = max(div, ext.div_max)
            errs.append(ext.trace_error())
        order = min(order, float(np.log2(errs[-2] / errs[-1])))
    try:
        extend_boundary(np.ones(64), np.zeros(64), geom)
        raised = 0.0
    except FluxCompatibilityError:
        raised = 1.0
    return [_le("extension", f"max |div F b| over {n_traces} traces", div, 1e-8),
            _ge("extension", "trace error order under refinement", order, 1.9),
            _ge("extension", "nonzero mean raises the compatibility error", raised, 1.0)]


def suite_mollifier(seed=0):
    from .coupling import Mollifier, holder_fixture, ordering_margin, ordering_threshold

    x = np.arange(128) * 2 * np.pi / 128
    c = np.full(128, 0.7)
    const_err = max(float(np.max(np.abs(Mollifier(e).static(c) - 0.7 - np.sqrt(e)))) for e in (0.1, 0.05, 0.025))
    d = 0.3 * np.cos(x) + 0.1 * np.sin(2 * x)
    devs = [float(np.max(np.abs(Mollifier(e).static(d) - d - np.sqrt(e)))) for e in (0.1, 0.05, 0.025)]
    ratio = max(devs[1] / devs[0], devs[2] / devs[1])
    h = holder_fixture()
    thr = ordering_threshold(h)
    margin = min(ordering_margin(h, e) for e in np.geomspace(1e-4, thr, 25))
    return [_le("mollifier", "R_eps const - const - sqrt(eps)", const_err, 1e-15),
            _le("mollifier", "smooth deviation ratio along eps ladder", ratio, 1.0 - 1e-12),
            _ge("mollifier", f"Hoelder fixture ordering margin for eps <= {thr:.3g}", margin, 0.0)]


def suite_pstructure(seed=0, n_samples=100_000):
    from .fluid import StressModel, p_structure_audit, stress

    out = []
    worst = 0
    for p in (1.5, 2.0, 3.0):
        for delta in (0.0, 1.0):
            for model in (StressModel.additive(1.0, delta, p), StressModel.quadratic(1.0, delta, p)):
                rep = p_structure_audit(model, n_samples=n_samples, seed=seed)
                worst = max(worst, rep["monotone_violations"])
    out.append(_le("p-structure", f"monotonicity violations, {n_samples} pairs x 12 models", worst, 0))
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((1000, 3, 3))
    D = 0.5 * (A + np.swapaxes(A, 1, 2))
    newt = stress(StressModel.newtonian(0.5), D)
    err = max(float(np.max(np.abs(stress(m, D) - newt)))
              for m in (StressModel.additive(1.0, 1.0, 2.0), StressModel.quadratic(1.0, 1.0, 2.0),
                        StressModel.additive(1.0, 0.0, 2.0), StressModel.quadratic(1.0, 0.0, 2.0)))
    out.append(_le("p-structure", "p = 2 equals Newtonian stress", err, 1e-14))
    neg = p_structure_audit(lambda D: -D, n_samples=1000, seed=seed)["monotone_violations"]
    out.append(_ge("p-structure", "negative control S = -D is flagged", neg, 1))
    return out


def suite_energy(seed=0, T=0.1):
    from . import channel as ch
    from .coupling import CoupledProblem, CoupledSolver, advance_until
    from .diagnostics import energy_nonincreasing, shell_oscillation
    from .geometry import SurfaceGeometry
    from .koiter import KoiterParams
    from .runner import _profile

    basis = ch.ChannelBasis()
    eta1 = _profile("bump", 0.5, 4, basis.x)
    res = advance_until(CoupledSolver(CoupledProblem(basis, eta1=eta1, dt=1e-3)), T)
    E = res.ledger[:, 1] + res.ledger[:, 2] + res.ledger[:, 3]
    rel = float(np.max(np.abs(res.column("residual")))) / E[0]
    mono = 1.0 if energy_nonincreasing(res.ledger, strict=True) else 0.0
    geom = SurfaceGeometry.sphere(1.0, 8)
    Y = geom.ops.harmonic(2, 1) + 0.5 * geom.ops.harmonic(3, 0)
    led = shell_oscillation(geom, KoiterParams(), 0.01 * Y, 0.0 * Y,
                            load=lambda t: np.sin(3 * t) * geom.ops.harmonic(2, 1), dt=1e-2, T=1.0)
    shell = float(np.max(np.abs(led[:, 4]))) / max(led[0, 1] + led[0, 2], 1e-300)
    return [_le("energy", f"flat plate |residual| / E(0) up to t = {T:g}", rel, 1e-3),
            _ge("energy", "total energy strictly decreasing", mono, 1.0),
            _le("energy", "sphere shell-only balance, relative", shell, 1e-10)]


def suite_reynolds(seed=0):
    from .diagnostics import prescribed_motion, reynolds_slope

    eta, eta_t = prescribed_motion()
    slope, _, _ = reynolds_slope(eta, eta_t)
    return [_ge("reynolds", "residual slope under (dt, h) halving", slope, 0.9)]


SUITES = {
    "gamma": suite_gamma,
    "commutator": suite_commutator,
    "koiter-duality": suite_koiter_duality,
    "korn": suite_korn,
    "cosh": suite_cosh,
    "extension": suite_extension,
    "mollifier": suite_mollifier,
    "p-structure": suite_pstructure,
    "energy": suite_energy,
    "reynolds": suite_reynolds,
}


def run_suite(name, seed=0):
    if name == "all":
        out = []
        for fn in SUITES.values():
            out.extend(fn(seed=seed))
        return out
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed=seed)
