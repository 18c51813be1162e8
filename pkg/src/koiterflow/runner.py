"""Build a coupled solver from a ``SimConfig`` and execute runs and sweeps."""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from scipy.special import i0e

from . import channel as ch
from . import io
from .config import SimConfig
from .coupling import CoupledProblem, CoupledSolver, CouplingConfig, config_hash
from .diagnostics import energy_residual, gronwall_envelope
from .errors import ConfigError
from .fluid import StressModel
from .forcing import Fixture
from .koiter import KoiterParams
from .spectral import trig_eval

log = logging.getLogger(__name__)

SWEEP_KEYS = {
    "eps_reg": ("coupling", "eps_reg"),
    "dt": ("coupling", "dt"),
    "resolution": ("geometry", "nx"),
    "p": ("fluid", "p"),
}


def _profile(shape, amplitude, k, x):
    if shape == "zero" or amplitude == 0.0:
        return np.zeros_like(x)
    if shape == "bump":
        return amplitude * (np.exp(k * (np.cos(x) - 1.0)) - i0e(k))
    return amplitude * np.cos(k * x)


def _fixture(sec):
    return Fixture(sec["kind"], sec["amplitude"], sec["wavenumber"], sec["speed"], sec["t0"], sec["width"],
                   sec["component"], sec["shape"])


def build_problem(cfg: SimConfig, seed=None):
    g, s, f, c, ini = cfg["geometry"], cfg["shell"], cfg["fluid"], cfg["coupling"], cfg["initial"]
    basis = ch.ChannelBasis(length=g["length"], n_shell=g["n_shell"], n_fourier=g["n_fourier"],
                            n_poly=g["n_poly"], nx=g["nx"], nz=g["nz"])
    x = basis.x * (2.0 * np.pi / basis.length)
    eta0 = _profile(ini["eta0_shape"], ini["eta0_amplitude"], ini["eta0_wavenumber"], x)
    eta1 = _profile(ini["eta1_shape"], ini["eta1_amplitude"], ini["eta1_wavenumber"], x)
    if ini["noise"] > 0:
        rng = np.random.default_rng(cfg.get("run", "seed") if seed is None else seed)
        for k in range(1, g["n_shell"] + 1):
            a, b = rng.standard_normal(2) * ini["noise"] / k**2
            eta1 = eta1 + a * np.cos(k * x) + b * np.sin(k * x)
    if f["model"] == "newtonian":
        stress = StressModel.newtonian(f["sigma_visc"])
    else:
        stress = StressModel(f["model"], mu0=f["mu0"], delta=f["delta"], p=f["p"])
    return CoupledProblem(
        basis=basis,
        koiter=KoiterParams(s["eps0"], s["lame_lambda"], s["lame_mu"], s["rho_s"]),
        stress=stress,
        eps_damp=s["eps_damp"],
        eta0=eta0,
        eta1=eta1,
        f=_fixture(cfg["forcing.f"]),
        g=_fixture(cfg["forcing.g"]),
        dt=c["dt"],
    )


def coupling_config(cfg):
    c = cfg["coupling"]
    return CouplingConfig(eps_reg=c["eps_reg"], omega_relax=c["omega_relax"], tol_eta=c["tol_eta"],
                          tol_u=c["tol_u"], max_outer=c["max_outer"], theta_contact=c["theta_contact"],
                          window_steps=c["window_steps"])


def build_solver(cfg, seed=None):
    return CoupledSolver(build_problem(cfg, seed), coupling_config(cfg))


def physics_hash(cfg):
    """Hash of everything that changes the trajectory (output settings excluded)."""
    d = cfg.to_dict()
    d.pop("output", None)
    d["run"] = {"seed": d["run"]["seed"]}
    return config_hash(d)


def summary_of(result, cfg, chash):
    report = gronwall_envelope(result.ledger)
    e0 = float(result.ledger[0, 1] + result.ledger[0, 2] + result.ledger[0, 3])
    return {
        "stop_reason": result.stop_reason,
        "T_star": result.T_star,
        "t_final": float(result.times[-1]),
        "c_fit": report.c_fit,
        "gronwall_violated": report.violated,
        "energy_initial": e0,
        "energy_residual_final": energy_residual(result.ledger),
        "energy_residual_max": float(np.max(np.abs(result.column("residual")))),
        "eta_inf_max": float(np.max(result.column("eta_inf"))),
        "min_mass_eigenvalue": result.min_eig,
        "max_outer_iterations": result.max_outer_iterations,
        "steps": int(result.times.size - 1),
        "config_hash": chash,
        "seed": cfg.get("run", "seed"),
    }


def _dump_fields(solver, state, out, fmt):
    times, eta, alpha, _ = state.arrays()
    basis = solver.basis
    io.write_grid(out / "eta_final.grid", eta[-1], spacing=(basis.length / basis.nx,), time=times[-1], fmt=fmt)
    geo = solver.geometry(times, eta, times[-1])
    F = ch.mode_fields(basis, geo, need_grad=False)
    u = ch.velocity_at(F, alpha[-1]).reshape(2, basis.nx, basis.nz)
    for name, comp in (("u_final", u[0]), ("w_final", u[1])):
        io.write_grid(out / f"{name}.grid", comp, spacing=(basis.length / basis.nx, float("nan")),
                      time=times[-1], fmt=fmt)
    io.write_grid(out / "z_nodes.grid", basis.z, fmt=fmt)


def run(cfg, out_dir, restart=None, t_max=None, seed=None):
    """Execute one configured run; returns (RunResult, summary dict).

    Writes ledger.csv, summary.json, checkpoints/ and the final field dumps
    into ``out_dir``.  ``restart`` names a checkpoint directory to resume from.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    solver = build_solver(cfg, seed)
    chash = physics_hash(cfg)
    t_max = cfg.get("coupling", "t_max") if t_max is None else t_max
    fmt = cfg.get("output", "dump_format")
    if restart is not None:
        state, _ = io.load_checkpoint(restart, chash)
        solver._first_row = np.asarray(state.ledger[0])
    else:
        state = solver.initial_state()
    dt = solver.problem.dt
    total = int(round(t_max / dt))
    every = cfg.get("output", "checkpoint_every")
    ckdir = out / "checkpoints"
    grid = (solver.basis.nx, solver.basis.nz)
    eps = solver.config.eps_reg
    while state.step < total and state.stop_reason != "contact":
        target = total if every <= 0 else min(total, (state.step // every + 1) * every)
        solver.advance(state, target * dt)
        if every > 0 and state.stop_reason != "contact":
            io.save_checkpoint(ckdir / f"step_{state.step:07d}", state, eps_reg=eps, grid=grid,
                               config_hash=chash, fmt=fmt)
    if state.stop_reason is None:
        state.stop_reason = "horizon"
    io.save_checkpoint(ckdir / "final", state, eps_reg=eps, grid=grid, config_hash=chash, fmt=fmt)
    result = solver.result(state)
    io.write_ledger(out / "ledger.csv", result.ledger)
    summary = summary_of(result, cfg, chash)
    io.write_json(out / "summary.json", summary)
    _dump_fields(solver, state, out, fmt)
    if cfg.get("output", "plots"):
        t = result.column("t")
        io.svg_line_plot(out / "energy.svg", t, {
            "E_kin_fluid": result.column("E_kin_fluid"),
            "E_kin_shell": result.column("E_kin_shell"),
            "E_elastic": result.column("E_elastic"),
            "D_visc_cum": result.column("D_visc_cum"),
        }, title="energy ledger")
        io.svg_line_plot(out / "eta_inf.svg", t, {"eta_inf": result.column("eta_inf")}, title="sup |eta|")
    return result, summary


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep_configs(cfg, key, values):
    if key not in SWEEP_KEYS:
        raise ConfigError(f"not sweepable; choose one of {', '.join(SWEEP_KEYS)}", key=key)
    if not values:
        raise ConfigError("empty value list", key=key)
    if key == "p" and cfg.get("fluid", "model") == "newtonian":
        raise ConfigError("sweeping p needs a p-structure fluid model", key="fluid.model")
    section, name = SWEEP_KEYS[key]
    out = []
    for v in values:
        c = cfg.with_value(section, name, v)
        if key == "resolution":
            c = c.with_value("geometry", "nz", max(8, c.get("geometry", "nx") // 2))
        out.append(c)
    return out


def _sweep_worker(args):
    cfg, out_dir, seed = args
    try:
        res, summary = run(cfg, out_dir, seed=seed)
        return {"ok": True, "summary": summary, "times": res.times, "eta": res.eta,
                "length": cfg.get("geometry", "length"), "residual": res.column("residual")}
    except Exception as exc:  # reported per value; the sweep continues
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def _distance(a, b):
    """max over shared times of sup_x |eta_a - eta_b| on the coarser grid."""
    ta, tb = a["times"], b["times"]
    if ta.size > tb.size:
        a, b, ta, tb = b, a, tb, ta
    nx = min(a["eta"].shape[1], b["eta"].shape[1])
    x = np.arange(nx) * a["length"] / nx
    best = 0.0
    for i, t in enumerate(ta):
        j = int(np.argmin(np.abs(tb - t)))
        if abs(tb[j] - t) > 1e-9 * max(1.0, abs(t)):
            continue
        ea = trig_eval(a["eta"][i], a["length"], x)
        eb = trig_eval(b["eta"][j], b["length"], x)
        best = max(best, float(np.max(np.abs(ea - eb))))
    return best


def sweep(cfg, key, values, out_dir, workers=None, seed=None):
    """Run one simulation per value in parallel; returns the comparison dict."""
    cfgs = sweep_configs(cfg, key, values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(c, out / f"{key}={v}", seed) for c, v in zip(cfgs, values)]
    workers = workers or max(1, min(len(jobs), os.cpu_count() or 1))
    if workers == 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    runs = []
    for v, r in zip(values, results):
        entry = {"value": v, "ok": r["ok"], "dir": f"{key}={v}"}
        if r["ok"]:
            entry["summary"] = r["summary"]
            entry["residual_max"] = float(np.max(np.abs(r["residual"])))
        else:
            entry["error"] = r["error"]
        runs.append(entry)
    pairs = []
    ok = [(v, r) for v, r in zip(values, results) if r["ok"]]
    for i in range(len(ok)):
        for j in range(i + 1, len(ok)):
            pairs.append({"a": ok[i][0], "b": ok[j][0], "eta_distance": _distance(ok[i][1], ok[j][1])})
    ratios = []
    for i in range(len(ok) - 1):
        r0 = float(np.max(np.abs(ok[i][1]["residual"])))
        r1 = float(np.max(np.abs(ok[i + 1][1]["residual"])))
        ratios.append(r0 / r1 if r1 > 0 else float("inf"))
    comparison = {"key": key, "values": list(values), "runs": runs, "pairwise": pairs,
                  "residual_ratios": ratios, "failures": sum(1 for r in results if not r["ok"])}
    io.write_json(out / "comparison.json", comparison)
    return comparison
