"""Steady-state continuation with eigenvalue-based bifurcation detection.

Eigenvalues are those of ``G_u phi = mu M phi``; since the dynamics are
``M du/dt = -G``, a steady state is stable when all ``Re mu > 0``.  The
number of eigenvalues with ``Re mu < 0`` near each shift is tracked along
the branch and a change triggers localization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _arclength as al
from .linsys import eigs_near
from .problem import (Problem, constraint_jacobian, constraints, jacobian, param_derivative,
                      residual)

log = logging.getLogger(__name__)

REGULAR, BRANCH_POINT, HOPF_POINT, FOLD_POINT, USER_POINT = "regular", "BP", "HP", "FP", "user"


@dataclass
class SteadySettings:
    """Numerical settings of a steady branch."""

    ds: float = 0.1
    dsmin: float = 1e-5
    dsmax: float = 0.2
    tol: float = 1e-8
    maxit: int = 20
    neig: int = 20
    shifts: tuple = (0.0,)
    mu1: float = 0.5
    mu2: float = 1e-4
    bisec: int = 10
    polish: bool = True
    usrlam: tuple = ()
    neg_tol: float = 1e-8
    stability: bool = True
    detect: bool = True
    xi: Optional[float] = None
    lam_range: tuple = (-np.inf, np.inf)


@dataclass
class BranchPoint:
    """One point of a steady branch.  ``counts`` holds the number of
    eigenvalues with negative real part near each shift."""

    step: int
    u: np.ndarray
    par: np.ndarray
    lam: float
    ptype: str = REGULAR
    counts: tuple = ()
    tangent: tuple | None = None
    ds: float = 0.0
    next_ds: float = 0.0
    crit_value: complex | None = None
    crit_vector: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    warning: str | None = None
    norm: float = 0.0
    umin: float = 0.0
    umax: float = 0.0
    iterations: int = 0

    @property
    def ineg(self) -> int:
        return int(sum(self.counts))


class SteadySystem:
    """``G(u, par) = 0`` and ``q(u, par) = 0`` with the primary and
    auxiliary parameters as scalar unknowns."""

    def __init__(self, problem: Problem, par: np.ndarray | None = None):
        self.problem = problem
        self.base = np.array(problem.params if par is None else par, dtype=float)
        self.active = (problem.ilam, *problem.aux)

    def full_par(self, p) -> np.ndarray:
        par = self.base.copy()
        par[list(self.active)] = p
        return par

    def scalars(self, par) -> np.ndarray:
        return np.asarray(par, dtype=float)[list(self.active)]

    def residual(self, x, p):
        par = self.full_par(p)
        return residual(self.problem, x, par), constraints(self.problem, x, par)

    def jacobian(self, x, p):
        prob = self.problem
        par = self.full_par(p)
        A = jacobian(prob, x, par)
        B = np.column_stack([param_derivative(prob, x, par, k) for k in self.active])
        C = constraint_jacobian(prob, x, par)
        D = np.zeros((prob.nq, len(self.active)))
        for j, k in enumerate(self.active):
            h = 1e-6 * (1 + abs(par[k]))
            pl, mi = par.copy(), par.copy()
            pl[k] += h
            mi[k] -= h
            D[:, j] = (constraints(prob, x, pl) - constraints(prob, x, mi)) / (2 * h)
        return A, B, C, D


def default_weights(problem: Problem, xi: float | None = None) -> al.Weights:
    xi = 1.0 / problem.nu if xi is None else xi
    return al.Weights(xi, np.full(1 + problem.nq, 1.0 - xi))


def solution_norm(problem: Problem, u: np.ndarray) -> float:
    """``sqrt(u^T M u / |Omega|)`` with the scalar mass matrix per component."""
    comps = problem.components(u)
    M = problem.ops.M
    total = sum(float(c @ (M @ c)) for c in comps)
    return float(np.sqrt(max(total, 0.0) / problem.mesh.length))


def stability_pencil(problem: Problem, u, par):
    """Matrices ``(A, B)`` of the pencil whose eigenvalues decide stability.

    With steady constraints the auxiliary parameters are appended, which
    removes the neutral directions the constraints fix.
    """
    A = jacobian(problem, u, par)
    if problem.nq == 0:
        return A, problem.mass
    sysm = SteadySystem(problem, par)
    _, B, C, D = sysm.jacobian(u, sysm.scalars(par))
    Aext = sp.bmat([[A, sp.csr_matrix(B[:, 1:])], [sp.csr_matrix(C), sp.csr_matrix(D[:, 1:])]], format="csr")
    Mext = sp.block_diag([problem.mass, sp.csr_matrix((problem.nq, problem.nq))], format="csr")
    return Aext, Mext


@dataclass
class EigenSummary:
    counts: tuple
    values: list
    vectors: list


def eigen_summary(problem: Problem, u, par, shifts, neig, neg_tol=1e-8) -> EigenSummary:
    A, M = stability_pencil(problem, u, par)
    res = eigs_near(A, M, list(shifts), neig)
    counts = tuple(int(np.sum(r.values.real < -neg_tol)) for r in res)
    return EigenSummary(counts, [r.values for r in res], [r.vectors[: problem.nu] for r in res])


def critical_eigenpair(summary: EigenSummary, shift_index: int):
    vals = summary.values[shift_index]
    if vals.size == 0:
        return None, None
    order = np.lexsort((-vals.imag, np.abs(vals.real)))
    i = order[0]
    mu, v = vals[i], summary.vectors[shift_index][:, i]
    if mu.imag < 0:
        # prefer the member of a conjugate pair with positive frequency
        mu, v = np.conj(mu), np.conj(v)
    return complex(mu), v


@dataclass
class Branch:
    """A steady branch under construction."""

    problem: Problem
    settings: SteadySettings
    system: SteadySystem
    weights: al.Weights
    u: np.ndarray
    p: np.ndarray
    tx: np.ndarray
    tp: np.ndarray
    ds: float
    points: list = field(default_factory=list)
    stop_reason: str | None = None
    step_count: int = 0
    on_step: Optional[Callable] = None

    @property
    def par(self) -> np.ndarray:
        return self.system.full_par(self.p)

    @property
    def special(self) -> list:
        return [pt for pt in self.points if pt.ptype in (BRANCH_POINT, HOPF_POINT, FOLD_POINT)]

    @property
    def lam_values(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])


def newton_steady(problem: Problem, u, par=None, tol: float = 1e-8, maxit: int = 20,
                  row=None, system: SteadySystem | None = None) -> al.NewtonResult:
    """Correct a steady state at fixed primary parameter (or with ``row``)."""
    system = system or SteadySystem(problem, par)
    p = system.scalars(system.base)
    row = row or al.FixedRow(0, float(p[0]))
    return al.newton(system, np.asarray(u, dtype=float), p, row, tol=tol, maxit=maxit)


def _make_point(branch: Branch, step, u, p, ptype=REGULAR, summary=None, its=0) -> BranchPoint:
    prob = branch.problem
    par = branch.system.full_par(p)
    u1 = prob.components(u)[0]
    return BranchPoint(step=step, u=u.copy(), par=par, lam=float(p[0]), ptype=ptype,
                       counts=summary.counts if summary else (),
                       tangent=(branch.tx.copy(), branch.tp.copy()), ds=branch.ds, next_ds=branch.ds,
                       eigenvalues=np.concatenate(summary.values) if summary else None,
                       norm=solution_norm(prob, u), umin=float(u1.min()), umax=float(u1.max()),
                       iterations=its)


def init_branch(problem: Problem, u, settings: SteadySettings | None = None, direction: float = 1.0,
                par=None) -> Branch:
    """Correct ``u`` at the current parameters and set up a branch."""
    settings = settings or SteadySettings()
    system = SteadySystem(problem, par)
    res = newton_steady(problem, u, tol=settings.tol, maxit=settings.maxit, system=system)
    if not res.converged:
        raise RuntimeError(f"initial point did not converge: {res.reason}")
    weights = default_weights(problem, settings.xi)
    tx, tp = al.initial_tangent(system, res.x, res.p, weights, 0, direction)
    branch = Branch(problem, settings, system, weights, res.x, res.p, tx, tp, settings.ds)
    summary = _summary(branch, res.x, res.p)
    branch.points.append(_make_point(branch, 0, res.x, res.p, summary=summary, its=res.iterations))
    return branch


def resume_branch(problem: Problem, point: BranchPoint, settings: SteadySettings | None = None) -> Branch:
    """Branch that continues from a stored point using its tangent and step size."""
    if point.tangent is None:
        raise ValueError("point has no tangent; start a new branch with init_branch instead")
    settings = settings or SteadySettings()
    system = SteadySystem(problem, point.par)
    tx, tp = (np.array(v, dtype=float) for v in point.tangent)
    p = system.scalars(point.par)
    branch = Branch(problem, settings, system, default_weights(problem, settings.xi), np.array(point.u, dtype=float),
                    p, tx, tp, point.next_ds or settings.ds, step_count=point.step)
    branch.points.append(point)
    return branch


def _summary(branch: Branch, u, p):
    s = branch.settings
    if not s.stability:
        return None
    return eigen_summary(branch.problem, u, branch.system.full_par(p), s.shifts, s.neig, s.neg_tol)


def _ctrl(s: SteadySettings) -> al.StepControl:
    return al.StepControl(ds=s.ds, dsmin=s.dsmin, dsmax=s.dsmax, tol=s.tol, maxit=s.maxit)


def cont_steady(branch: Branch, nsteps: int) -> Branch:
    """Advance ``branch`` by ``nsteps`` arclength steps, detecting bifurcations."""
    s = branch.settings
    ctrl = _ctrl(s)
    for _ in range(nsteps):
        prev = branch.points[-1] if branch.points else None
        try:
            out = al.arclength_step(branch.system, branch.u, branch.p, branch.tx, branch.tp,
                                    branch.weights, ctrl, branch.ds)
        except al.StallError as exc:
            branch.stop_reason = str(exc)
            log.warning("%s: %s", branch.problem.name, exc)
            break
        old_tp = branch.tp
        u0, p0 = branch.u, branch.p
        branch.u, branch.p, branch.tx, branch.tp, branch.ds = out.x, out.p, out.tx, out.tp, out.ds_next
        branch.step_count += 1
        summary = _summary(branch, out.x, out.p)
        point = _make_point(branch, branch.step_count, out.x, out.p, summary=summary,
                            its=out.newton.iterations)
        point.ds = out.ds_used
        if np.sign(old_tp[0]) != np.sign(out.tp[0]) and old_tp[0] != 0:
            point.ptype = FOLD_POINT
        _land_targets(branch, u0, p0, out, s.usrlam)
        if s.detect and prev is not None and summary is not None and prev.counts:
            for ev in detect_bifurcation(branch, prev, point):
                branch.points.append(ev)
        branch.points.append(point)
        if branch.on_step is not None:
            branch.on_step(branch)
        lo, hi = s.lam_range
        if not lo <= point.lam <= hi:
            branch.stop_reason = "left parameter range"
            break
    return branch


def _land_targets(branch: Branch, u0, p0, out, targets):
    la, lb = float(p0[0]), float(out.p[0])
    for lam in sorted(targets, reverse=lb < la):
        if not (min(la, lb) < lam <= max(la, lb)) or la == lb:
            continue
        theta = (lam - la) / (lb - la)
        guess_u = u0 + theta * (out.x - u0)
        guess_p = p0 + theta * (out.p - p0)
        res = al.newton(branch.system, guess_u, guess_p, al.FixedRow(0, lam),
                        tol=branch.settings.tol, maxit=branch.settings.maxit)
        if res.converged:
            pt = _make_point(branch, branch.step_count, res.x, res.p, USER_POINT,
                             _summary(branch, res.x, res.p), res.iterations)
            branch.points.append(pt)
        else:
            log.warning("target lambda=%g not reached: %s", lam, res.reason)


def _crit_at(branch: Branch, u, p, shift_index):
    summ = _summary(branch, u, p)
    mu, v = critical_eigenpair(summ, shift_index)
    return summ, mu, v


def detect_bifurcation(branch: Branch, a: BranchPoint, b: BranchPoint) -> list:
    """Localize every eigenvalue crossing between two consecutive points.

    Bisection runs along the secant from ``a`` to ``b``; intermediate
    points solve the system on the hyperplane orthogonal to the secant.
    A final secant iteration on the critical real part sharpens the
    location well below ``mu2``.
    """
    s = branch.settings
    if not a.counts or not b.counts or a.counts == b.counts:
        return []
    sysm = branch.system
    xa, pa = a.u, sysm.scalars(a.par)
    xb, pb = b.u, sysm.scalars(b.par)
    events = []

    def solve_at(t):
        res = al.hyperplane_solve(sysm, xa, pa, xb, pb, t, branch.weights, tol=s.tol, maxit=s.maxit)
        return res

    lo_t, lo_counts = 0.0, a.counts
    for _ in range(4):
        hi_t, hi_counts = 1.0, b.counts
        changed = [i for i, (c0, c1) in enumerate(zip(lo_counts, hi_counts)) if c0 != c1]
        if not changed:
            break
        k = changed[0]
        summ_hi = _summary(branch, xb, pb) if hi_t == 1.0 else None
        mu, vec = critical_eigenpair(summ_hi, k)
        warning = None
        if mu is None or abs(mu.real) >= s.mu1:
            warning = "critical eigenvalue not small; event not localized"
            ev = replace(b, ptype=HOPF_POINT if mu is not None and abs(mu.imag) > 1e-6 else BRANCH_POINT,
                         crit_value=mu, crit_vector=vec, warning=warning)
            events.append(ev)
            break
        best = None  # (t, res, summ, mu, vec)
        re_lo = re_hi = None
        for _ in range(s.bisec):
            t = 0.5 * (lo_t + hi_t)
            res = solve_at(t)
            if not res.converged:
                warning = f"bisection solve failed: {res.reason}"
                break
            summ, mu, vec = _crit_at(branch, res.x, res.p, k)
            best = (t, res, summ, mu, vec)
            if summ.counts[k] == lo_counts[k]:
                lo_t, re_lo = t, mu.real
            else:
                hi_t, hi_counts, re_hi = t, summ.counts, mu.real
            if abs(mu.real) < s.mu2:
                break
        else:
            if best is not None and abs(best[3].real) >= s.mu2:
                warning = "bisection cap reached"
        if best is None:
            events.append(replace(b, ptype=BRANCH_POINT, warning=warning or "no bisection point"))
            break
        if s.polish and warning is None:
            best = _polish(branch, solve_at, k, lo_t, hi_t, re_lo, re_hi, best)
        t, res, summ, mu, vec = best
        ptype = HOPF_POINT if abs(mu.imag) > 1e-6 else BRANCH_POINT
        ev = _make_point(branch, b.step, res.x, res.p, ptype, summ, res.iterations)
        ev.crit_value, ev.crit_vector, ev.warning = mu, vec, warning
        events.append(ev)
        # continue with the remainder of the step if more crossings remain
        lo_t = hi_t
        res = solve_at(lo_t) if lo_t < 1.0 else None
        if res is None or not res.converged:
            break
        lo_counts = _summary(branch, res.x, res.p).counts
        if lo_counts == b.counts:
            break
    return events


def _polish(branch, solve_at, k, lo_t, hi_t, re_lo, re_hi, best, iters=8):
    """Secant (Illinois) iteration on Re mu along the secant parameter."""
    if re_lo is None:
        res = solve_at(lo_t)
        if not res.converged:
            return best
        re_lo = _crit_at(branch, res.x, res.p, k)[1].real
    if re_hi is None:
        res = solve_at(hi_t)
        if not res.converged:
            return best
        re_hi = _crit_at(branch, res.x, res.p, k)[1].real
    if re_lo * re_hi > 0:
        return best
    side = 0
    for _ in range(iters):
        t = hi_t - re_hi * (hi_t - lo_t) / (re_hi - re_lo)
        res = solve_at(t)
        if not res.converged:
            break
        summ, mu, vec = _crit_at(branch, res.x, res.p, k)
        if abs(mu.real) < abs(best[3].real):
            best = (t, res, summ, mu, vec)
        if abs(mu.real) < 1e-10:
            break
        if mu.real * re_hi > 0:
            hi_t, re_hi = t, mu.real
            if side == 1:
                re_lo *= 0.5
            side = 1
        else:
            lo_t, re_lo = t, mu.real
            if side == -1:
                re_hi *= 0.5
            side = -1
    return best


def initeig(problem: Problem, u, par=None, omega_max: float = 4.0, npoints: int = 64,
            power_steps: int = 1) -> float:
    """Guess a frequency ``omega`` so that ``i omega`` is a useful extra shift.

    For each ``omega`` on a uniform grid one shift-invert power step
    (warm-started from the previous grid point) estimates the pencil
    eigenvalue nearest ``i omega``; the one with the smallest real part in
    modulus wins and its imaginary part is returned.
    """
    par = problem.params if par is None else par
    A, M = stability_pencil(problem, u, par)
    A = sp.csc_matrix(A, dtype=complex)
    M = sp.csc_matrix(M, dtype=complex)
    n = A.shape[0]
    v = np.random.default_rng(2024).standard_normal(n).astype(complex)
    best_w, best_re = 0.0, np.inf
    base_re = None
    for w in np.linspace(0.0, omega_max, npoints):
        try:
            lu = spla.splu(A - 1j * w * M)
        except RuntimeError:
            continue
        for _ in range(power_steps):
            v = lu.solve(M @ v)
            v /= np.linalg.norm(v)
        denom = np.vdot(v, M @ v)
        if abs(denom) < 1e-14:
            continue
        mu = np.vdot(v, A @ v) / denom
        if w == 0.0:
            base_re = abs(mu.real)
        if abs(mu.real) < best_re:
            best_re, best_w = abs(mu.real), abs(mu.imag)
    if base_re is not None and best_re >= base_re:
        return 0.0
    return float(best_w)
