"""Localization and two-parameter continuation of Hopf and branch points.

Hopf points solve, with ``phi = phi_r + i phi_i``::

    G(u) = 0,  G_u phi_r + omega M phi_i = 0,  G_u phi_i - omega M phi_r = 0,
    c^T phi_r = 1,  c^T phi_i = 0

for ``(u, phi_r, phi_i, omega, lambda)`` at fixed second parameter ``w``.
Branch points solve ``G + mu M psi = 0, G_u^T psi = 0, |psi|^2 = 1,
<psi, G_lambda> = 0`` for ``(u, psi, lambda, mu)``.  Freeing ``w`` gives
curves in the ``(lambda, w)`` plane.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import _arclength as al
from .linsys import eigs_near
from .problem import Problem, bpjac, bpjac_fd, jacobian, param_derivative, residual, spjac, spjac_fd
from .steady import BranchPoint

log = logging.getLogger(__name__)

__all__ = ["HopfCurveSystem", "BranchCurveSystem", "CurveState", "CurvePoint", "Curve",
           "hpcontini", "hploc", "hpcont", "hpcontexit", "bpcontini", "bploc", "bpcont", "bpcontexit",
           "spjac_fd", "bpjac_fd"]


def _fd_step(value: float) -> float:
    return 1e-6 * (1 + abs(value))


class _CurveBase:
    """Shared parameter handling: ``p`` holds the extra scalar first, then
    ``lambda`` and ``w``."""

    def __init__(self, problem: Problem, par, windex: int):
        if problem.nq:
            raise ValueError("special-point continuation needs a problem without steady constraints")
        self.problem = problem
        self.base = np.array(par, dtype=float)
        self.il = problem.ilam
        self.iw = windex

    def full_par(self, p) -> np.ndarray:
        par = self.base.copy()
        par[self.il] = p[1]
        par[self.iw] = p[2]
        return par

    def _par_columns(self, x, p, func):
        """Central differences of ``func(x, par)`` in ``lambda`` and ``w``."""
        cols = []
        for k in (1, 2):
            h = _fd_step(p[k])
            pl, mi = p.copy(), p.copy()
            pl[k] += h
            mi[k] -= h
            cols.append((func(x, self.full_par(pl)) - func(x, self.full_par(mi))) / (2 * h))
        return cols


class HopfCurveSystem(_CurveBase):
    """Extended Hopf system; ``x = (u, phi_r, phi_i)``, ``p = (omega, lambda, w)``."""

    def __init__(self, problem: Problem, par, windex: int, c: np.ndarray):
        super().__init__(problem, par, windex)
        self.c = np.asarray(c, dtype=float)

    def split(self, x):
        n = self.problem.nu
        return x[:n], x[n:2 * n], x[2 * n:]

    def _rx(self, x, par, omega):
        u, pr, pi = self.split(x)
        A = jacobian(self.problem, u, par)
        M = self.problem.mass
        return np.concatenate([residual(self.problem, u, par), A @ pr + omega * (M @ pi),
                               A @ pi - omega * (M @ pr)])

    def residual(self, x, p):
        par = self.full_par(p)
        _, pr, pi = self.split(x)
        return self._rx(x, par, p[0]), np.array([self.c @ pr - 1.0, self.c @ pi])

    def jacobian(self, x, p):
        prob = self.problem
        par = self.full_par(p)
        u, pr, pi = self.split(x)
        n = prob.nu
        G_u = jacobian(prob, u, par)
        M = prob.mass
        om = p[0]
        A = sp.bmat([[G_u, None, None],
                     [spjac(prob, u, par, pr), G_u, om * M],
                     [spjac(prob, u, par, pi), -om * M, G_u]], format="csr")
        dlam, dw = self._par_columns(x, p, lambda xx, pp: self._rx(xx, pp, om))
        domega = np.concatenate([np.zeros(n), M @ pi, -(M @ pr)])
        B = np.column_stack([domega, dlam, dw])
        zero = np.zeros(n)
        C = np.vstack([np.concatenate([zero, self.c, zero]), np.concatenate([zero, zero, self.c])])
        D = np.zeros((2, 3))
        return A, B, C, D


class BranchCurveSystem(_CurveBase):
    """Extended branch-point system; ``x = (u, psi)``, ``p = (mu, lambda, w)``."""

    def split(self, x):
        n = self.problem.nu
        return x[:n], x[n:]

    def _rx(self, x, par, mu):
        u, psi = self.split(x)
        prob = self.problem
        A = jacobian(prob, u, par)
        return np.concatenate([residual(prob, u, par) + mu * (prob.mass @ psi), A.T @ psi])

    def _g_lambda(self, u, par):
        return param_derivative(self.problem, u, par, self.il)

    def residual(self, x, p):
        par = self.full_par(p)
        u, psi = self.split(x)
        return self._rx(x, par, p[0]), np.array([psi @ psi - 1.0, psi @ self._g_lambda(u, par)])

    def jacobian(self, x, p):
        prob = self.problem
        par = self.full_par(p)
        u, psi = self.split(x)
        n = prob.nu
        M = prob.mass
        G_u = jacobian(prob, u, par)
        A = sp.bmat([[G_u, p[0] * M], [bpjac(prob, u, par, psi), G_u.T]], format="csr")
        dlam, dw = self._par_columns(x, p, lambda xx, pp: self._rx(xx, pp, p[0]))
        dmu = np.concatenate([M @ psi, np.zeros(n)])
        B = np.column_stack([dmu, dlam, dw])
        # d/du <psi, G_lambda> = (d/dlambda G_u)^T psi
        h = _fd_step(p[1])
        pl, mi = par.copy(), par.copy()
        pl[self.il] += h
        mi[self.il] -= h
        du = ((jacobian(prob, u, pl) - jacobian(prob, u, mi)).T @ psi) / (2 * h)
        g_lam = self._g_lambda(u, par)
        C = np.vstack([np.concatenate([np.zeros(n), 2 * psi]), np.concatenate([du, g_lam])])
        row = lambda pp: psi @ self._g_lambda(u, self.full_par(pp))
        D = np.zeros((2, 3))
        for k in (1, 2):
            hk = _fd_step(p[k])
            a, b = p.copy(), p.copy()
            a[k] += hk
            b[k] -= hk
            D[1, k] = (row(a) - row(b)) / (2 * hk)
        return A, B, C, D


@dataclass
class CurveState:
    """Point on a special-point curve with its tangent."""

    system: _CurveBase
    x: np.ndarray
    p: np.ndarray
    tx: np.ndarray | None = None
    tp: np.ndarray | None = None

    @property
    def problem(self) -> Problem:
        return self.system.problem

    @property
    def u(self) -> np.ndarray:
        return self.x[: self.problem.nu]

    @property
    def par(self) -> np.ndarray:
        return self.system.full_par(self.p)

    @property
    def lam(self) -> float:
        return float(self.p[1])

    @property
    def w(self) -> float:
        return float(self.p[2])


@dataclass
class CurvePoint:
    step: int
    lam: float
    w: float
    extra: float
    u: np.ndarray
    par: np.ndarray
    iterations: int = 0


@dataclass
class Curve:
    """A continued curve; ``extra`` is ``omega`` for Hopf and ``mu`` for branch points."""

    kind: str
    state: CurveState
    ds: float
    points: list = field(default_factory=list)
    stop_reason: str | None = None

    def lam_w(self) -> np.ndarray:
        return np.array([(pt.lam, pt.w) for pt in self.points])


def _weights(state: CurveState, xi: float | None) -> al.Weights:
    xi = 1.0 / state.x.size if xi is None else xi
    return al.Weights(xi, np.array([0.0, 0.5, 0.5]))


def hpcontini(problem: Problem, point: BranchPoint, windex: int) -> CurveState:
    """Hopf-curve state from a detected Hopf point; ``c`` is the real part of
    the stored eigenvector and stays fixed along the curve."""
    if point.crit_vector is None or point.crit_value is None or point.crit_value.imag == 0:
        raise ValueError("point has no Hopf eigenpair")
    psi = np.asarray(point.crit_vector[: problem.nu], dtype=complex)
    omega = float(point.crit_value.imag)
    if omega < 0:
        psi, omega = np.conj(psi), -omega
    c = psi.real / np.linalg.norm(psi.real)
    scale = c @ psi
    if abs(scale) < 1e-12:
        raise ValueError("normalization vector is orthogonal to the eigenvector")
    psi = psi / scale
    system = HopfCurveSystem(problem, point.par, windex, c)
    x = np.concatenate([point.u, psi.real, psi.imag])
    p = np.array([omega, point.par[problem.ilam], point.par[windex]])
    return CurveState(system, x, p)


def _locate(state: CurveState, tol: float, maxit: int) -> CurveState:
    res = al.newton(state.system, state.x, state.p, al.FixedRow(2, float(state.p[2])), tol=tol, maxit=maxit)
    if not res.converged:
        raise RuntimeError(f"localization failed: {res.reason}")
    return replace(state, x=res.x, p=res.p)


def hploc(state: CurveState, tol: float = 1e-10, maxit: int = 20) -> CurveState:
    """Newton on the Hopf system at fixed second parameter."""
    sysm = state.system
    if abs(sysm.c @ state.x[sysm.problem.nu:2 * sysm.problem.nu]) < 1e-14:
        raise ValueError("normalization vector is orthogonal to phi_r")
    return _locate(state, tol, maxit)


def hpcontexit(state: CurveState):
    """Steady state and parameters at a curve point, for plain continuation."""
    return state.u.copy(), state.par


def bpcontini(problem: Problem, point: BranchPoint, windex: int) -> CurveState:
    """Branch-curve state from a detected branch point; ``psi`` spans the
    adjoint kernel."""
    A = jacobian(problem, point.u, point.par)
    res = eigs_near(A.T.tocsr(), problem.mass.T.tocsr(), [0.0], 1)[0]
    psi = np.real(res.vectors[: problem.nu, 0] * np.exp(-1j * np.angle(res.vectors[np.argmax(np.abs(res.vectors[:, 0])), 0])))
    psi /= np.linalg.norm(psi)
    system = BranchCurveSystem(problem, point.par, windex)
    x = np.concatenate([point.u, psi])
    p = np.array([0.0, point.par[problem.ilam], point.par[windex]])
    return CurveState(system, x, p)


def bploc(state: CurveState, tol: float = 1e-10, maxit: int = 20) -> CurveState:
    return _locate(state, tol, maxit)


def bpcontexit(state: CurveState):
    return state.u.copy(), state.par


def _continue(kind: str, state: CurveState, nsteps: int, ds: float, dsmax: float, tol: float,
              maxit: int, xi: float | None, direction: float) -> Curve:
    weights = _weights(state, xi)
    sysm = state.system
    if state.tx is None:
        tx, tp = al.initial_tangent(sysm, state.x, state.p, weights, 2, direction)
        state = replace(state, tx=tx, tp=tp)
    curve = Curve(kind, state, ds)
    curve.points.append(CurvePoint(0, state.lam, state.w, float(state.p[0]), state.u.copy(), state.par))
    ctrl = al.StepControl(ds=ds, dsmin=ds * 1e-3, dsmax=dsmax, tol=tol, maxit=maxit)
    for k in range(nsteps):
        st = curve.state
        try:
            out = al.arclength_step(sysm, st.x, st.p, st.tx, st.tp, weights, ctrl, curve.ds)
        except al.StallError as exc:
            curve.stop_reason = str(exc)
            break
        curve.state = replace(st, x=out.x, p=out.p, tx=out.tx, tp=out.tp)
        curve.ds = out.ds_next
        s = curve.state
        curve.points.append(CurvePoint(k + 1, s.lam, s.w, float(s.p[0]), s.u.copy(), s.par,
                                       out.newton.iterations))
    return curve


def hpcont(state: CurveState, nsteps: int, ds: float = 0.02, dsmax: float = 0.05, tol: float = 1e-8,
           maxit: int = 10, xi: float | None = None, direction: float = 1.0) -> Curve:
    """Continue a Hopf point in ``(lambda, w)``; records ``omega``."""
    return _continue("HP", state, nsteps, ds, dsmax, tol, maxit, xi, direction)


def bpcont(state: CurveState, nsteps: int, ds: float = 0.02, dsmax: float = 0.05, tol: float = 1e-8,
           maxit: int = 10, xi: float | None = None, direction: float = 1.0) -> Curve:
    """Continue a branch point in ``(lambda, w)``; records ``mu``."""
    return _continue("BP", state, nsteps, ds, dsmax, tol, maxit, xi, direction)


def hopf_jacobian_pattern(state: CurveState) -> sp.csr_matrix:
    """Block pattern of the Hopf-system Jacobian in ``x`` (3x3 blocks)."""
    A, _, _, _ = state.system.jacobian(state.x, state.p)
    return (A != 0).astype(int)
