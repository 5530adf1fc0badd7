"""Theta-scheme time integration of ``M du/dt = -G(u)`` for stability checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linsys import lu_factor
from .problem import Problem, jacobian, residual

log = logging.getLogger(__name__)


@dataclass
class TimeSeries:
    """Sampled trajectory; ``errors[k] = |u(times[k]) - u_0|_inf``."""

    times: np.ndarray
    errors: np.ndarray
    snapshots: dict = field(default_factory=dict)
    final: Optional[np.ndarray] = None
    completed: bool = True
    message: str = ""


def _check_integrable(problem: Problem):
    if problem.algebraic:
        raise ValueError("time integration needs a nonsingular mass on all rows; problem has algebraic components")
    if problem.data.get("ill_posed_ivp"):
        raise ValueError(f"{problem.name} is not well posed as an initial value problem")


def theta_integrate(problem: Problem, u0: np.ndarray, dt: float, nsteps: int, par=None, theta: float = 0.5,
                    save_every: int = 0, period: float = 1.0, t0: float = 0.0, tol: float = 1e-10,
                    maxit: int = 20) -> TimeSeries:
    """``nsteps`` steps of size ``dt`` with a chord-Newton solve per step.

    The iteration matrix ``M + theta dt G_u`` is factored at the start and
    refactored at the current state only when the chord iteration
    contracts poorly.  ``period`` is passed to time-dependent problems,
    which see the scaled time ``t / period``.
    """
    if not 0.5 <= theta <= 1.0:
        raise ValueError("theta must lie in [1/2, 1]")
    _check_integrable(problem)
    par = problem.params if par is None else np.asarray(par, dtype=float)
    M = problem.mass
    u = np.array(u0, dtype=float)
    start = u.copy()
    times, errors = [t0], [0.0]
    snaps = {0: u.copy()} if save_every else {}

    def G(v, t):
        return residual(problem, v, par, t=t / period, T=period)

    def factor(v, t):
        return lu_factor((M + theta * dt * jacobian(problem, v, par, t=t / period, T=period)).tocsc())

    lu = factor(u, t0)
    g_old = G(u, t0)
    t = t0
    for k in range(1, nsteps + 1):
        t_new = t + dt
        v = u.copy()
        explicit = (1 - theta) * dt * g_old
        ok = False
        refreshed = False
        prev = np.inf
        for _ in range(maxit):
            g_new = G(v, t_new)
            F = M @ (v - u) + theta * dt * g_new + explicit
            nf = np.linalg.norm(F, np.inf)
            if nf <= tol * max(1.0, np.linalg.norm(v, np.inf)):
                ok = True
                break
            if nf > 0.5 * prev and not refreshed:
                lu = factor(v, t_new)
                refreshed = True
            prev = nf
            v = v - lu.solve(F)
            if not np.all(np.isfinite(v)):
                break
        if not ok:
            msg = f"step {k} at t={t_new:.4g} failed to converge"
            log.warning(msg)
            return TimeSeries(np.array(times), np.array(errors), snaps, u, completed=False, message=msg)
        u, t, g_old = v, t_new, g_new
        times.append(t)
        errors.append(float(np.max(np.abs(u - start))))
        if save_every and k % save_every == 0:
            snaps[k] = u.copy()
    return TimeSeries(np.array(times), np.array(errors), snaps, u)


def hotintxs(problem: Problem, orbit, u0: Optional[np.ndarray] = None, npp: Optional[int] = None,
             nperiods: float = 4, save_every: int = 0, theta: float = 0.5) -> TimeSeries:
    """Integrate from an orbit slice over ``nperiods`` periods with ``T / npp`` steps.

    ``u0`` defaults to the first slice; ``npp`` defaults to ``10 m``.
    """
    npp = 10 * orbit.m if npp is None else npp
    u0 = orbit.Y[0] if u0 is None else u0
    dt = orbit.T / npp
    nsteps = int(round(nperiods * npp))
    return theta_integrate(problem, u0, dt, nsteps, orbit.par, theta, save_every, period=orbit.T)


def distance_to_orbit(u: np.ndarray, orbit, refine: int = 20) -> float:
    """Smallest sup-norm distance from ``u`` to the orbit, linearly interpolated in time."""
    Y = orbit.Y
    best = np.inf
    for j in range(orbit.m - 1):
        for s in np.linspace(0.0, 1.0, refine, endpoint=False):
            y = (1 - s) * Y[j] + s * Y[j + 1]
            best = min(best, float(np.max(np.abs(u - y))))
    return best
