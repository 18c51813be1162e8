"""Linear Volterra integro-differential systems

    A(t) a'(t) = B(t) a(t) + int_0^t C(t, s) a(s) ds + D(t)

stepped with the implicit midpoint rule for the local part and trapezoid
quadrature over the stored history for the memory integral.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SPDViolationError


def _as_callable(obj, nargs):
    if callable(obj):
        return obj
    value = np.atleast_2d(np.asarray(obj, dtype=float)) if nargs else np.atleast_1d(np.asarray(obj, dtype=float))
    if nargs == 2:
        return lambda t, s: value
    return lambda t: value


@dataclass
class IntegroSystem:
    """Coefficients as arrays (time independent) or callables of t / (t, s)."""

    A: object
    B: object
    C: object
    D: object

    @property
    def memory_is_constant(self):
        return not callable(self.C)


@dataclass
class Trajectory:
    t: np.ndarray
    alpha: np.ndarray

    def at(self, time):
        i = int(np.argmin(np.abs(self.t - time)))
        return self.alpha[i]


def cholesky_or_raise(A, t=None):
    A = np.atleast_2d(A)
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise SPDViolationError(f"mass matrix not symmetric at t={t}")
    try:
        return sla.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SPDViolationError(f"mass matrix not positive definite at t={t}") from exc


def midpoint_memory_step(A, B, C, D, a0, zeta, dt):
    """One step for a time-independent memory matrix C acting on zeta = int a.

    Midpoint rule for A a' = B a + D, trapezoid for zeta; returns (a1, zeta1).
    """
    zeta_part = zeta + 0.5 * dt * a0
    lhs = A / dt - 0.5 * B - 0.25 * dt * C
    rhs = A @ a0 / dt + 0.5 * B @ a0 + 0.5 * C @ zeta + 0.5 * C @ zeta_part + D
    a1 = np.linalg.solve(lhs, rhs)
    return a1, zeta_part + 0.5 * dt * a1


def integro_ode_solve(system, alpha0, T, dt):
    """Integrate the system on [0, T] with steps Δt; returns a Trajectory.

    A time-independent memory matrix uses a running trapezoid sum of the
    history; a callable C(t, s) is evaluated against every stored node.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    n = alpha0.size
    Af = _as_callable(system.A, 1)
    Bf = _as_callable(system.B, 1)
    Cf = _as_callable(system.C, 2)
    Df = system.D if callable(system.D) else (lambda t, _d=np.atleast_1d(np.asarray(system.D, dtype=float)): _d)
    nsteps = int(round(T / dt))
    times = dt * np.arange(nsteps + 1)
    alpha = np.zeros((nsteps + 1, n))
    alpha[0] = alpha0
    const_memory = system.memory_is_constant
    zeta = np.zeros(n)  # running integral of alpha (constant-memory path)
    mem_prev = np.zeros(n)
    for k in range(nsteps):
        t0, t1 = times[k], times[k + 1]
        tm = 0.5 * (t0 + t1)
        A = np.atleast_2d(Af(tm))
        B = np.atleast_2d(Bf(tm))
        D = np.atleast_1d(Df(tm))
        a0 = alpha[k]
        cholesky_or_raise(A, tm)
        if const_memory:
            alpha[k + 1], zeta = midpoint_memory_step(A, B, np.atleast_2d(Cf(t1, t1)), D, a0, zeta, dt)
            continue
        # trapezoid over nodes 0..k+1 at t1; unknown a1 enters with weight dt/2
        w = np.full(k + 2, dt)
        w[0] = w[-1] = 0.5 * dt
        known = np.zeros(n)
        for j in range(k + 1):
            known += w[j] * (np.atleast_2d(Cf(t1, times[j])) @ alpha[j])
        Ckk = np.atleast_2d(Cf(t1, t1))
        lhs = A / dt - 0.5 * B - 0.25 * dt * Ckk
        rhs = A @ a0 / dt + 0.5 * B @ a0 + 0.5 * mem_prev + 0.5 * known + D
        a1 = np.linalg.solve(lhs, rhs)
        alpha[k + 1] = a1
        mem_prev = known + 0.5 * dt * (Ckk @ a1)
    return Trajectory(times, alpha)


def cosh_oracle(dt=1e-3, T=1.0):
    """Relative error of a' = int_0^t a, a(0) = 1 against cosh(T)."""
    traj = integro_ode_solve(IntegroSystem(1.0, 0.0, 1.0, 0.0), [1.0], T, dt)
    return abs(traj.alpha[-1, 0] - np.cosh(T)) / np.cosh(T)


def observed_order(errors, ratio=2.0):
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(ratio)
