"""Periodic orbits as a boundary value problem in scaled time ``t in [0, 1]``.

An orbit is stored as ``m`` time slices ``u_1, ..., u_m`` with ``u_m = u_1``
on a mesh ``0 = t_1 < ... < t_m = 1``.  The discrete system uses the
trapezoidal rule on each interval::

    -M (u_j - u_{j-1}) / h_j - T/2 (G(u_j) + G(u_{j-1})) = 0,   j = 1..m-1
    u_m - u_1 = 0

where slice 1 wraps around to ``u_{m-1}``.  Unknowns for continuation are
the stacked slices plus ``(T, lambda, w)``; ``w`` are the parameters freed
by orbit constraints.  With a fixed period ``T`` drops out and one extra
parameter is freed instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _arclength as al
from .problem import (Problem, hopf_constraint_jacobian, hopf_constraints, jacobian, residual)

log = logging.getLogger(__name__)


@dataclass
class HopfSettings:
    """Numerical settings for periodic-orbit continuation.

    ``xi`` defaults to ``1/(m n_u)``.  ``flcheck`` selects the Floquet
    algorithm per step: 0 none, 1 monodromy product, 2 lifted pencil.
    """

    ds: float = 0.1
    dsmin: float = 1e-4
    dsmax: float = 0.5
    tol: float = 1e-8
    first_tol: float = 1e-4
    maxit: int = 10
    xi: Optional[float] = None
    w_t: float = 0.5
    w_a: float = 1.0
    pcfac: float = 10.0
    y0dsw: int = 2
    freeT: int = 1
    free_param: Optional[int] = None
    flcheck: int = 1
    fltol: float = 1e-4
    nfloq: int = 20
    bisec: int = 5
    detect: bool = True
    x0i: int = 0
    lam_range: tuple = (-np.inf, np.inf)


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    h = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def interval_lengths(t: np.ndarray) -> np.ndarray:
    """``h_j`` for slices ``j = 0..m-2`` (0-based); slice 0 uses the wrap interval."""
    h = np.diff(t)
    return np.concatenate([[h[-1]], h[:-1]])


def previous_slice(j: int, m: int) -> int:
    return m - 2 if j == 0 else j - 1


def active_indices(problem: Problem, settings: HopfSettings) -> tuple:
    idx = [problem.ilam, *problem.hopf_aux]
    if not settings.freeT:
        if settings.free_param is None:
            raise ValueError("fixed-period mode needs a free parameter")
        idx.append(settings.free_param)
    return tuple(idx)


def _slice_g(problem, Y, t, T, par):
    return np.array([residual(problem, Y[j], par, t=t[j], T=T) for j in range(Y.shape[0] - 1)])


def assemble_G(problem: Problem, Y: np.ndarray, t: np.ndarray, T: float, par, gvals=None) -> np.ndarray:
    """Residual slices, flattened slice-major (length ``m n_u``).

    ``Y`` has shape ``(m, n_u)``.  Algebraic components use ``-T/2 G_c(u_j)``.
    """
    m = Y.shape[0]
    M = problem.mass
    h = interval_lengths(t)
    G = _slice_g(problem, Y, t, T, par) if gvals is None else gvals
    alg = ~problem.dynamic_mask
    out = np.empty((m, problem.nu))
    for j in range(m - 1):
        jp = previous_slice(j, m)
        r = -(M @ (Y[j] - Y[jp])) / h[j] - 0.5 * T * (G[j] + G[jp])
        if alg.any():
            r[alg] = -0.5 * T * G[j][alg]
        out[j] = r
    out[m - 1] = Y[m - 1] - Y[0]
    bad = np.flatnonzero(~np.isfinite(out).all(axis=1))
    if bad.size:
        raise FloatingPointError(f"non-finite orbit residual at slice {int(bad[0])}")
    return out.ravel()


def slice_jacobians(problem: Problem, Y, t, T, par) -> list:
    return [jacobian(problem, Y[j], par, t=t[j], T=T) for j in range(Y.shape[0] - 1)]


def slice_blocks(problem: Problem, Y, t, T, par, jacs=None):
    """``(M_j, H_j)`` for slices ``j = 0..m-2`` so that the linearized
    interval map is ``M_j v_j = H_j v_{j-1}``."""
    m = Y.shape[0]
    h = interval_lengths(t)
    jacs = slice_jacobians(problem, Y, t, T, par) if jacs is None else jacs
    M = problem.mass
    alg = sp.diags((~problem.dynamic_mask).astype(float))
    dyn = sp.diags(problem.dynamic_mask.astype(float))
    blocks = []
    for j in range(m - 1):
        jp = previous_slice(j, m)
        Mj = (-M / h[j] - 0.5 * T * jacs[j]).tocsr()
        Hj = (-M / h[j] + 0.5 * T * jacs[jp])
        if problem.algebraic:
            Hj = dyn @ Hj
        blocks.append((Mj, sp.csr_matrix(Hj)))
    return blocks


def _coo_blocks(entries, shape):
    rows, cols, vals = [], [], []
    for (bi, bj, B, n) in entries:
        c = sp.coo_matrix(B)
        rows.append(c.row + bi * n)
        cols.append(c.col + bj * n)
        vals.append(c.data)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def assemble_Agamma(problem: Problem, Y, t, T, par, gamma: complex = 1.0, blocks=None) -> sp.csr_matrix:
    """Block bidiagonal-cyclic matrix; ``gamma = 1`` gives ``d G / d y``."""
    m = Y.shape[0]
    n = problem.nu
    blocks = slice_blocks(problem, Y, t, T, par) if blocks is None else blocks
    ent = []
    for j, (Mj, Hj) in enumerate(blocks):
        ent.append((j, j, Mj, n))
        ent.append((j, previous_slice(j, m), -Hj, n))
    eye = sp.identity(n, format="csr")
    ent.append((m - 1, m - 1, eye, n))
    ent.append((m - 1, 0, -gamma * eye, n))
    A = _coo_blocks(ent, (m * n, m * n))
    if np.iscomplexobj(gamma) and np.imag(gamma) != 0:
        return A
    return A.real.tocsr() if np.iscomplexobj(A.data) else A


def compute_y0d(problem: Problem, Y, t, T, par, mode: int = 2) -> np.ndarray:
    """``M du/dt`` on the slices (per unit scaled time), shape ``(m, n_u)``."""
    m = Y.shape[0]
    M = problem.mass
    if mode == 0:
        G = _slice_g(problem, Y, t, T, par)
        out = np.vstack([-T * G, -T * G[:1]])
        return out
    d = np.empty_like(Y)
    for j in range(m - 1):
        jp = previous_slice(j, m)
        tp = t[jp] - (1.0 if j == 0 else 0.0)
        if mode == 1:
            d[j] = (Y[j] - Y[jp]) / (t[j] - tp)
        else:
            jn = j + 1
            d[j] = (Y[jn] - Y[jp]) / (t[jn] - tp)
    d[m - 1] = d[0]
    return np.array([M @ v for v in d])


def orbit_norm(problem: Problem, Y, t) -> float:
    """``sqrt(int_0^1 |u(t)|_M^2 dt / |Omega|)`` with the scalar mass per component."""
    w = trapezoid_weights(t)
    M = problem.ops.M
    total = 0.0
    for wj, u in zip(w, Y):
        for c in problem.components(u):
            total += wj * float(c @ (M @ c))
    return float(np.sqrt(max(total, 0.0) / problem.mesh.length))


@dataclass
class HopfOrbit:
    """Slices, mesh, period and parameters of a periodic orbit.

    ``Y`` holds the slices row-wise, shape ``(m, n_u)``; ``y`` is the
    transposed ``(n_u, m)`` view.  ``tx``/``tp`` is the tangent in the
    continuation unknowns; ``base`` optionally stores the point the next
    arclength step is measured from, when that differs from this orbit
    (e.g. a predictor).
    """

    problem: Problem
    Y: np.ndarray
    t: np.ndarray
    T: float
    par: np.ndarray
    settings: HopfSettings = field(default_factory=HopfSettings)
    y0d: Optional[np.ndarray] = None
    tx: Optional[np.ndarray] = None
    tp: Optional[np.ndarray] = None
    base: Optional[tuple] = None
    converged: bool = True
    ptype: str = "regular"
    label: str = ""

    def __post_init__(self):
        self.Y = np.array(self.Y, dtype=float)
        self.t = np.array(self.t, dtype=float)
        self.par = np.array(self.par, dtype=float)
        if self.Y.shape != (self.t.size, self.problem.nu):
            raise ValueError(f"slices have shape {self.Y.shape}, expected ({self.t.size}, {self.problem.nu})")
        if self.t[0] != 0.0 or self.t[-1] != 1.0 or np.any(np.diff(self.t) <= 0):
            raise ValueError("t-mesh must increase strictly from 0 to 1")
        self.Y[-1] = self.Y[0]
        if self.y0d is None:
            self.y0d = compute_y0d(self.problem, self.Y, self.t, self.T, self.par, self.settings.y0dsw)

    @property
    def y(self) -> np.ndarray:
        return self.Y.T

    @property
    def m(self) -> int:
        return self.t.size

    @property
    def lam(self) -> float:
        return float(self.par[self.problem.ilam])

    @property
    def active(self) -> tuple:
        return active_indices(self.problem, self.settings)

    @property
    def w(self) -> np.ndarray:
        return self.par[list(self.active[1:])]

    @property
    def xi(self) -> float:
        s = self.settings
        return 1.0 / (self.m * self.problem.nu) if s.xi is None else s.xi

    def unknowns(self):
        x = self.Y.ravel().copy()
        scal = list(self.par[list(self.active)])
        p = np.array(([self.T] if self.settings.freeT else []) + scal)
        return x, p

    def weights(self) -> al.Weights:
        return hopf_weights(self.problem, self.settings, self.m, self.xi)

    def norm(self) -> float:
        return orbit_norm(self.problem, self.Y, self.t)

    def with_unknowns(self, x, p, **changes) -> "HopfOrbit":
        s = self.settings
        Y = np.asarray(x, dtype=float).reshape(self.m, self.problem.nu)
        par = self.par.copy()
        if s.freeT:
            T, scal = float(p[0]), p[1:]
        else:
            T, scal = self.T, p
        par[list(self.active)] = scal
        return replace(self, Y=Y, T=T, par=par, **changes)

    def amplitude(self, comp: int = 0) -> float:
        u = np.array([self.problem.components(v)[comp] for v in self.Y])
        return float(u.max() - u.min())


def hopf_weights(problem: Problem, settings: HopfSettings, m: int, xi: float | None = None) -> al.Weights:
    xi = 1.0 / (m * problem.nu) if xi is None else xi
    nw = len(active_indices(problem, settings)) - 1
    if settings.freeT:
        wp = [(1 - xi) * settings.w_t, (1 - xi) * (1 - settings.w_t)]
    else:
        wp = [1 - xi]
    return al.Weights(xi, np.array(wp + [settings.w_a] * nw))


class HopfSystem:
    """Extended system for Newton: orbit residual, phase and orbit constraints."""

    def __init__(self, orbit: HopfOrbit):
        self.orbit = orbit
        self.problem = orbit.problem
        self.settings = orbit.settings
        self.t = orbit.t
        self.m = orbit.m
        self.active = orbit.active
        self.y0d = orbit.y0d
        self.pw = trapezoid_weights(orbit.t)

    def split(self, x, p):
        Y = x.reshape(self.m, self.problem.nu)
        par = self.orbit.par.copy()
        if self.settings.freeT:
            T, scal = p[0], p[1:]
        else:
            T, scal = self.orbit.T, p
        par[list(self.active)] = scal
        return Y, float(T), par

    def phase(self, Y) -> float:
        return float(self.settings.pcfac * np.sum(self.pw * np.einsum("jn,jn->j", Y, self.y0d)))

    def phase_gradient(self) -> np.ndarray:
        return (self.settings.pcfac * self.pw[:, None] * self.y0d).ravel()

    def residual(self, x, p):
        Y, T, par = self.split(x, p)
        rx = assemble_G(self.problem, Y, self.t, T, par)
        rp = np.concatenate([[self.phase(Y)], hopf_constraints(self.problem, Y, self.t, par)])
        return rx, rp

    def _param_fd(self, x, p, k):
        h = 1e-6 * (1 + abs(p[k]))
        pl, mi = p.copy(), p.copy()
        pl[k] += h
        mi[k] -= h
        Yl, Tl, parl = self.split(x, pl)
        Ym, Tm, parm = self.split(x, mi)
        dG = (assemble_G(self.problem, Yl, self.t, Tl, parl) - assemble_G(self.problem, Ym, self.t, Tm, parm)) / (2 * h)
        dQ = (hopf_constraints(self.problem, Yl, self.t, parl) - hopf_constraints(self.problem, Ym, self.t, parm)) / (2 * h)
        return dG, dQ

    def jacobian(self, x, p):
        prob = self.problem
        Y, T, par = self.split(x, p)
        jacs = slice_jacobians(prob, Y, self.t, T, par)
        A = assemble_Agamma(prob, Y, self.t, T, par, 1.0, slice_blocks(prob, Y, self.t, T, par, jacs))
        nscal = len(p)
        B = np.zeros((x.size, nscal))
        D = np.zeros((1 + prob.nh, nscal))
        for k in range(nscal):
            if k == 0 and self.settings.freeT and not prob.time_dependent:
                G = _slice_g(prob, Y, self.t, T, par)
                dG = np.zeros((self.m, prob.nu))
                alg = ~prob.dynamic_mask
                for j in range(self.m - 1):
                    jp = previous_slice(j, self.m)
                    dG[j] = -0.5 * (G[j] + G[jp])
                    dG[j][alg] = -0.5 * G[j][alg]
                B[:, 0] = dG.ravel()
                continue
            dG, dQ = self._param_fd(x, p, k)
            B[:, k] = dG
            D[1:, k] = dQ
        C = np.vstack([self.phase_gradient()[None, :],
                       hopf_constraint_jacobian(prob, Y, self.t, par).reshape(prob.nh, x.size)])
        return A, B, C, D


def phase_condition(orbit: HopfOrbit, reference: HopfOrbit | None = None):
    """Phase value and gradient; ``y0d`` comes from ``reference`` (default: the orbit itself)."""
    ref = reference or orbit
    sysm = HopfSystem(replace(orbit, y0d=ref.y0d))
    return sysm.phase(orbit.Y), sysm.phase_gradient()


def arclength_residual(orbit: HopfOrbit, previous: HopfOrbit, ds: float) -> float:
    """Arclength condition of ``orbit`` relative to ``previous`` and its tangent."""
    x, p = orbit.unknowns()
    x0, p0 = previous.unknowns()
    row = al.ArclengthRow(x0, p0, previous.tx, previous.tp, previous.weights(), ds)
    return row.value(x, p)


def xinorm(orbit: HopfOrbit, dx, dp) -> float:
    return orbit.weights().norm(dx, dp)


def newton_po(orbit: HopfOrbit, mode: str = "fixed", ds: float | None = None, tol: float | None = None,
              maxit: int | None = None) -> tuple[HopfOrbit, al.NewtonResult]:
    """Correct an orbit.

    ``mode="fixed"`` keeps the primary parameter; ``"arclength"`` uses the
    orbit's ``base`` (or the orbit itself) with its tangent and ``ds``.
    """
    s = orbit.settings
    tol = s.tol if tol is None else tol
    maxit = s.maxit if maxit is None else maxit
    sysm = HopfSystem(orbit)
    x, p = orbit.unknowns()
    if mode == "fixed":
        lam_pos = 1 if s.freeT else 0
        row = al.FixedRow(lam_pos, float(p[lam_pos]))
    elif mode == "arclength":
        x0, p0 = orbit.base if orbit.base is not None else (x, p)
        row = al.ArclengthRow(x0, p0, orbit.tx, orbit.tp, orbit.weights(), s.ds if ds is None else ds)
    else:
        raise ValueError(f"unknown Newton mode {mode!r}")
    res = al.newton(sysm, x, p, row, tol=tol, maxit=maxit)
    new = orbit.with_unknowns(res.x, res.p, converged=res.converged)
    return new, res


@dataclass
class HopfPoint:
    """Per-step record of a periodic-orbit branch."""

    step: int
    lam: float
    T: float
    par: np.ndarray
    ind: int = -1
    err: float = np.nan
    multipliers: Optional[np.ndarray] = None
    umin: float = 0.0
    umax: float = 0.0
    norm: float = 0.0
    ptype: str = "regular"
    Y: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    tangent: Optional[tuple] = None
    ds: float = 0.0
    next_ds: float = 0.0
    iterations: int = 0
    residual: float = 0.0
    crit_multiplier: Optional[complex] = None
    crit_vector: Optional[np.ndarray] = None
    warning: Optional[str] = None
    floquet_unreliable: bool = False

    @property
    def m(self) -> int:
        return 0 if self.t is None else self.t.size


@dataclass
class HopfBranch:
    """A periodic-orbit branch: current orbit (with tangent) plus records."""

    problem: Problem
    orbit: HopfOrbit
    ds: float
    points: list = field(default_factory=list)
    stop_reason: Optional[str] = None
    step_count: int = 0
    pending_first: bool = False

    @property
    def settings(self) -> HopfSettings:
        return self.orbit.settings

    @property
    def special(self) -> list:
        return [pt for pt in self.points if pt.ptype not in ("regular", "user")]


def _record(branch: HopfBranch, orbit: HopfOrbit, step: int, its: int = 0, res: float = 0.0) -> HopfPoint:
    prob = branch.problem
    u1 = orbit.Y[:, : prob.npts]
    return HopfPoint(step=step, lam=orbit.lam, T=orbit.T, par=orbit.par.copy(),
                     umin=float(u1.min()), umax=float(u1.max()), norm=orbit.norm(),
                     Y=orbit.Y.copy(), t=orbit.t.copy(),
                     tangent=(None if orbit.tx is None else (orbit.tx.copy(), orbit.tp.copy())),
                     ds=branch.ds, next_ds=branch.ds, iterations=its, residual=res)


def _floquet(orbit: HopfOrbit, point: HopfPoint):
    from . import floquet
    s = orbit.settings
    if not s.flcheck:
        return None
    if s.flcheck == 2:
        fr = floquet.floq_fa2(orbit)
    else:
        fr = floquet.floq_fa1(orbit, s.nfloq)
    fr.ind = floquet.po_index(fr, s.fltol)
    point.ind, point.err, point.multipliers = fr.ind, fr.err, fr.multipliers
    point.floquet_unreliable = fr.unreliable
    if fr.err > 1e-6:
        log.info("trivial multiplier off by %.2e at step %d", fr.err, point.step)
    return fr


def init_po_branch(orbit: HopfOrbit, ds: float | None = None) -> HopfBranch:
    """Branch from a converged orbit with tangent, or from a predictor
    (``converged=False`` with ``base`` set) whose first step is pending."""
    ds = orbit.settings.ds if ds is None else ds
    br = HopfBranch(orbit.problem, orbit, ds)
    if orbit.converged and orbit.base is None:
        if orbit.tx is None:
            sysm = HopfSystem(orbit)
            x, p = orbit.unknowns()
            lam_pos = 1 if orbit.settings.freeT else 0
            tx, tp = al.initial_tangent(sysm, x, p, orbit.weights(), lam_pos, np.sign(ds) or 1.0)
            br.orbit = replace(orbit, tx=tx, tp=tp)
            br.ds = abs(ds)
        pt = _record(br, br.orbit, 0)
        _floquet(br.orbit, pt)
        br.points.append(pt)
    else:
        br.pending_first = True
    return br


def resume_po_branch(orbit: HopfOrbit, step: int, ds: float) -> HopfBranch:
    """Branch that continues from a stored orbit with tangent, numbering steps after ``step``."""
    if orbit.tx is None:
        raise ValueError("orbit has no tangent; use init_po_branch")
    br = HopfBranch(orbit.problem, orbit, ds, step_count=step)
    pt = _record(br, orbit, step)
    _floquet(orbit, pt)
    br.points.append(pt)
    return br


def _ctrl(s: HopfSettings) -> al.StepControl:
    return al.StepControl(ds=s.ds, dsmin=s.dsmin, dsmax=s.dsmax, tol=s.tol, maxit=s.maxit)


def cont_po(branch: HopfBranch, nsteps: int) -> HopfBranch:
    """Arclength continuation of periodic orbits with optional Floquet
    analysis and detection of orbit bifurcations."""
    from . import floquet
    s = branch.settings
    ctrl = _ctrl(s)
    for _ in range(nsteps):
        orb = branch.orbit
        sysm = HopfSystem(orb)
        weights = orb.weights()
        if branch.pending_first:
            x0, p0 = orb.base
            tol = s.first_tol
        else:
            x0, p0 = orb.unknowns()
            tol = s.tol
        try:
            out = al.arclength_step(sysm, x0, p0, orb.tx, orb.tp, weights, ctrl, branch.ds, tol=tol)
        except al.StallError as exc:
            branch.stop_reason = str(exc)
            log.warning("%s: %s", branch.problem.name, exc)
            break
        new = orb.with_unknowns(out.x, out.p, tx=out.tx, tp=out.tp, base=None, converged=True)
        its, last_res = out.newton.iterations, out.newton.history[-1]
        if branch.pending_first and s.first_tol > s.tol:
            # tighten right away at the accepted point with the new phase reference
            sys2 = HopfSystem(new)
            row = al.ArclengthRow(x0, p0, orb.tx, orb.tp, weights, out.ds_used)
            res = al.newton(sys2, out.x, out.p, row, tol=s.tol, maxit=s.maxit)
            if res.converged:
                new = new.with_unknowns(res.x, res.p)
                its, last_res = its + res.iterations, res.history[-1]
        new = replace(new, y0d=compute_y0d(new.problem, new.Y, new.t, new.T, new.par, s.y0dsw))
        old_tp = orb.tp
        branch.orbit = new
        branch.pending_first = False
        branch.ds = out.ds_next
        branch.step_count += 1
        point = _record(branch, new, branch.step_count, its, last_res)
        point.ds = out.ds_used
        _floquet(new, point)
        lam_pos = 1 if s.freeT else 0
        fold = np.sign(old_tp[lam_pos]) != np.sign(out.tp[lam_pos]) and old_tp[lam_pos] != 0
        prev = branch.points[-1] if branch.points else None
        if fold:
            point.ptype = "FP"
        if (s.detect and s.flcheck and prev is not None and prev.ind >= 0 and point.ind >= 0
                and prev.ind != point.ind and not fold):
            for ev in floquet.hobifdetec(branch, prev, point):
                branch.points.append(ev)
        branch.points.append(point)
        lo, hi = s.lam_range
        if not lo <= point.lam <= hi:
            branch.stop_reason = "left parameter range"
            break
    return branch


def orbit_from_point(branch: HopfBranch, point: HopfPoint) -> HopfOrbit:
    """Rebuild the orbit stored in a branch record."""
    o = branch.orbit
    tx, tp = point.tangent if point.tangent is not None else (None, None)
    orb = replace(o, Y=point.Y.copy(), t=point.t.copy(), T=point.T, par=point.par.copy(),
                  tx=tx, tp=tp, base=None, converged=True, y0d=None)
    return orb


def hogradinf(orbit: HopfOrbit) -> float:
    """Time of the largest sup-norm of ``du/dt`` over interior slices."""
    if orbit.m < 3:
        raise ValueError("need at least three slices")
    Y, t = orbit.Y, orbit.t
    best, arg = -1.0, 1
    for j in range(1, orbit.m - 1):
        d = np.max(np.abs(Y[j + 1] - Y[j - 1])) / (t[j + 1] - t[j - 1])
        if d > best:
            best, arg = d, j
    return float(t[arg])


def hopftref(orbit: HopfOrbit, tstar: float, nintervals: int = 3) -> HopfOrbit:
    """Insert midpoints into the ``nintervals`` intervals nearest ``tstar``."""
    if not 0.0 <= tstar < 1.0:
        raise ValueError("tstar must lie in [0, 1)")
    t = orbit.t
    mids = 0.5 * (t[:-1] + t[1:])
    chosen = np.sort(np.argsort(np.abs(mids - tstar), kind="stable")[:nintervals])
    tnew = np.sort(np.concatenate([t, mids[chosen]]))

    def interp(A):
        return np.array([np.interp(tnew, t, col) for col in A.T]).T

    Ynew = interp(orbit.Y)
    tx = tp = None
    if orbit.tx is not None:
        txs = interp(orbit.tx.reshape(orbit.m, -1))
        tx = txs.ravel()
        tp = orbit.tp.copy()
    new = replace(orbit, Y=Ynew, t=tnew, tx=tx, tp=tp, y0d=None, base=None)
    if tx is not None:
        w = new.weights()
        nrm = w.norm(tx, tp)
        new.tx, new.tp = tx / nrm, tp / nrm
    return new
