"""Branch switching: onto periodic orbits from Hopf points, onto travelling
waves, off periodic orbits at multipliers +1 and -1, and direct guesses.

A Hopf point carries ``G_u Psi = i omega M Psi``.  Since the dynamics are
``M du/dt = -G`` the small orbits look like ``u0 + 2 a Re(exp(-i omega t) Psi)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _arclength as al
from .fem1d import block_expand
from .hopf import HopfOrbit, HopfSettings, hopf_weights, previous_slice, slice_blocks
from .linsys import eigs_near, lu_factor
from .problem import Problem, jacobian, spjac
from .steady import Branch, BranchPoint, SteadySettings, init_branch, newton_steady, stability_pencil

log = logging.getLogger(__name__)


class BranchSwitchError(RuntimeError):
    pass


@dataclass
class NormalForm:
    """Data of the Hopf normal form ``z' = (mu_r' dlam + i omega) z + c1 |z|^2 z``."""

    omega: float
    mu_r_prime: float
    re_c1: float

    @property
    def dlam_coefficient(self) -> float:
        """``lambda - lambda_H`` per squared amplitude on the bifurcating parabola."""
        return -self.re_c1 / self.mu_r_prime

    @property
    def supercritical(self) -> bool:
        return self.re_c1 < 0


def hopf_eigenbasis(problem: Problem, point: BranchPoint, count: int = 1):
    """Frequency and ``count`` eigenvectors for the eigenvalue nearest ``i omega``."""
    if point.crit_value is None or abs(point.crit_value.imag) <= 0:
        raise BranchSwitchError("point has no Hopf eigenpair")
    omega = abs(point.crit_value.imag)
    A, M = stability_pencil(problem, point.u, point.par)
    res = eigs_near(A, M, [1j * omega], count)[0]
    vecs = res.vectors[: problem.nu]
    return float(res.values[0].imag), vecs, res.values


def _adjoint(problem: Problem, u, par, omega: float):
    A = jacobian(problem, u, par)
    return eigs_near(A.T.tocsr(), problem.mass.T.tocsr(), [1j * omega], 1)[0].vectors[:, 0]


def _bilinear(problem: Problem, u, par, v, w):
    """Second derivative ``G_uu[v, w]`` for complex ``v, w``."""
    Sr = spjac(problem, u, par, v.real)
    Si = spjac(problem, u, par, v.imag)
    return Sr @ w + 1j * (Si @ w)


def _cubic_same(problem: Problem, u, par, v, w, h):
    """``G_uuu[v, v, w]`` for real ``v`` by a central difference of ``G_uu[v, .]``."""
    up = spjac(problem, u + h * v, par, v)
    um = spjac(problem, u - h * v, par, v)
    return ((up - um) @ w) / (2 * h)


def _trilinear(problem: Problem, u, par, q, w, h):
    a, b = q.real, q.imag
    caa = _cubic_same(problem, u, par, a, w, h)
    cbb = _cubic_same(problem, u, par, b, w, h)
    cpp = _cubic_same(problem, u, par, a + b, w, h)
    cmm = _cubic_same(problem, u, par, a - b, w, h)
    cab = 0.25 * (cpp - cmm)
    return caa - cbb + 2j * cab


def hogetnf(problem: Problem, point: BranchPoint, hodel: float = 1e-4,
            settings: SteadySettings | None = None) -> NormalForm:
    """Estimate ``mu_r'`` and ``Re c1`` at a Hopf point.

    ``c1`` refers to ``u = u_H + z q + conj(z q)`` with ``max|q| = 1``.

    ``mu_r'`` is the growth-rate derivative from the critical eigenvalue at
    ``lambda_H +- hodel`` (steady states re-solved there).  ``c1`` is
    projected with the adjoint eigenvector from second derivatives of ``G``
    and a finite-difference third derivative with step ``hodel``.
    """
    if problem.nq:
        raise BranchSwitchError("normal form needs an unconstrained problem; pass dlam explicitly")
    settings = settings or SteadySettings()
    u0, par0 = point.u, np.array(point.par, dtype=float)
    omega, vecs, _ = hopf_eigenbasis(problem, point)
    il = problem.ilam
    growth = []
    for sgn in (1.0, -1.0):
        par = par0.copy()
        par[il] += sgn * hodel
        res = newton_steady(problem, u0, par, tol=settings.tol, maxit=settings.maxit)
        if not res.converged:
            raise BranchSwitchError(f"steady solve at lambda_H{'+-'[sgn < 0]}hodel failed; pass dlam")
        A = jacobian(problem, res.x, par)
        mu = eigs_near(A, problem.mass, [1j * omega], 1)[0].values[0]
        growth.append(-mu.real)
    mu_r_prime = (growth[0] - growth[1]) / (2 * hodel)
    if abs(mu_r_prime) < 1e-10:
        raise BranchSwitchError("eigenvalue crosses with zero speed; pass dlam explicitly")

    # ``q`` solves G_u q = -i omega M q and ``ell`` solves G_u^T ell = i omega M ell;
    # max|q| = 1 matches the predictor's amplitude convention in hoswibra
    q = np.conj(vecs[:, 0])
    q = q / np.max(np.abs(q))
    ell = _adjoint(problem, u0, par0, omega)
    M = problem.mass
    scale = np.vdot(ell, M @ q)
    if abs(scale) < 1e-12 * np.linalg.norm(ell) * np.linalg.norm(M @ q):
        raise BranchSwitchError("adjoint projection is ill-conditioned; pass dlam explicitly")
    ell = ell / np.conj(scale)
    G = jacobian(problem, u0, par0).tocsc()
    hstep = hodel / max(np.max(np.abs(q)), 1e-300)
    c_qqq = _trilinear(problem, u0, par0, q, np.conj(q), hstep)
    b_qqb = _bilinear(problem, u0, par0, q, np.conj(q))
    b_qq = _bilinear(problem, u0, par0, q, q)
    lu0 = lu_factor(G)
    r0 = lu0.solve(b_qqb.real) + 1j * lu0.solve(b_qqb.imag)
    r2 = lu_factor((G + 2j * omega * M).tocsc()).solve(b_qq)
    term = (-np.vdot(ell, c_qqq) + 2 * np.vdot(ell, _bilinear(problem, u0, par0, q, r0))
            + np.vdot(ell, _bilinear(problem, u0, par0, np.conj(q), r2)))
    return NormalForm(omega=omega, mu_r_prime=float(mu_r_prime), re_c1=float(0.5 * term.real))


def _uniform_mesh(m: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


def hoswibra(problem: Problem, point: BranchPoint, ds: float = 0.1, *, dlam: Optional[float] = None,
             z: Optional[Sequence[complex]] = None, tl: int = 30, hodel: float = 1e-4,
             settings: HopfSettings | None = None, pcheck: bool = False) -> HopfOrbit:
    """Predictor for the periodic-orbit branch bifurcating at a Hopf point.

    Without ``dlam`` the parameter offset follows the normal form (quadratic
    in the amplitude); ``dlam`` gives a linear offset per unit amplitude,
    ``dlam=0`` a vertical predictor.  ``z`` combines several eigenvectors
    of a multiple Hopf point.  The amplitude is scaled so that the
    predictor lies at distance ``ds`` from the steady state in the weighted
    continuation norm.
    """
    settings = settings or HopfSettings()
    count = 1 if z is None else len(z)
    omega, vecs, _ = hopf_eigenbasis(problem, point, count)
    if z is None:
        psi = vecs[:, 0]
    else:
        psi = vecs[:, :count] @ np.asarray(z, dtype=complex)
    psi = psi / np.max(np.abs(psi))
    T = 2 * np.pi / omega
    t = _uniform_mesh(tl)
    u0 = np.asarray(point.u, dtype=float)
    shape = np.array([2 * np.real(np.exp(-2j * np.pi * tj) * psi) for tj in t])
    par = np.array(point.par, dtype=float)
    il = problem.ilam
    w = hopf_weights(problem, settings, tl, settings.xi)
    ax = np.sqrt(w.x) * np.linalg.norm(shape)
    lam_pos = 1 if settings.freeT else 0
    wl = w.p[lam_pos]
    if dlam is None:
        nf = hogetnf(problem, point, hodel)
        coef = nf.dlam_coefficient
        log.info("normal form: mu_r'=%.4g Re c1=%.4g (%s)", nf.mu_r_prime, nf.re_c1,
                 "supercritical" if nf.supercritical else "subcritical")
        b = np.sqrt(wl) * abs(coef)
        if b == 0:
            amp = ds / ax
        else:
            X = (-ax ** 2 + np.sqrt(ax ** 4 + 4 * b ** 2 * ds ** 2)) / (2 * b ** 2)
            amp = np.sqrt(X)
        dl = coef * amp ** 2
    else:
        amp = ds / np.sqrt(ax ** 2 + wl * dlam ** 2)
        dl = dlam * amp
    Y0 = np.tile(u0, (tl, 1))
    Y = Y0 + amp * shape
    par_new = par.copy()
    par_new[il] += dl
    base_orbit = HopfOrbit(problem, Y0, t, T, par, settings=settings)
    orbit = HopfOrbit(problem, Y, t, T, par_new, settings=settings, converged=False)
    x0, p0 = base_orbit.unknowns()
    x1, p1 = orbit.unknowns()
    step = w.norm(x1 - x0, p1 - p0)
    tx, tp = (x1 - x0) / step, (p1 - p0) / step
    orbit = replace(orbit, tx=tx, tp=tp, base=(x0, p0), label="hopf predictor")
    if pcheck:
        from .hopf import HopfSystem
        rx, rp = HopfSystem(orbit).residual(x1, p1)
        log.info("predictor residual %.3e", np.linalg.norm(np.concatenate([rx, rp]), np.inf))
    return orbit


def predictor_step_length(orbit: HopfOrbit) -> float:
    """Weighted distance of a predictor from its base point."""
    x0, p0 = orbit.base
    x1, p1 = orbit.unknowns()
    return orbit.weights().norm(x1 - x0, p1 - p0)


def _advection(problem: Problem) -> sp.csr_matrix:
    kx = problem.data.get("Kx_sys")
    if kx is None:
        kx = block_expand(problem.ops.Kx, np.eye(problem.ncomp))
    return sp.csr_matrix(kx)


def translation_constraint(problem: Problem, reference: np.ndarray, speed_index: int) -> Problem:
    """Problem with ``q(u) = (Kx u*)^T (u - u*)`` and the speed as auxiliary.

    The reference lives in ``problem.data['u_ref']``; update it with
    :func:`follow_reference` while continuing.
    """
    data = dict(problem.data)
    data["u_ref"] = np.array(reference, dtype=float)
    data["translation_speed"] = speed_index
    kx = _advection(problem)

    def q(prob, u, par):
        ref = prob.data["u_ref"]
        return np.array([(kx @ ref) @ (u - ref)])

    def qu(prob, u, par):
        return (kx @ prob.data["u_ref"])[None, :]

    return replace(problem, aux=(speed_index,), q=q, qu=qu, data=data)


def follow_reference(branch: Branch):
    """Step hook that moves the translation reference to the newest point."""
    branch.problem.data["u_ref"] = branch.u.copy()


def twswibra(problem: Problem, point: BranchPoint, speed_index: int, wavenumber: float,
             eps: float = 0.1, settings: SteadySettings | None = None, direction: float = 1.0) -> Branch:
    """Steady branch of travelling waves in the comoving frame.

    From the two-dimensional Hopf eigenspace the combination with
    ``d/dx Psi = i k Psi`` is selected (a wave moving to the right for
    ``k > 0``), the speed is set to ``omega / k`` and a translation phase
    condition with the speed as auxiliary parameter is attached.
    """
    if wavenumber == 0:
        raise BranchSwitchError("wavenumber 0 has no travelling mode")
    if not problem.mesh.periodic:
        raise BranchSwitchError("travelling waves need a periodic domain")
    omega, vecs, _ = hopf_eigenbasis(problem, point, 2)
    kx = _advection(problem)
    Msolve = lu_factor(problem.mass.tocsc())
    D = np.column_stack([Msolve.solve(kx @ vecs[:, j].real) + 1j * Msolve.solve(kx @ vecs[:, j].imag)
                         for j in range(2)])
    coef, *_ = np.linalg.lstsq(vecs, D, rcond=None)
    vals, cvecs = np.linalg.eig(coef)
    j = int(np.argmin(np.abs(vals - 1j * wavenumber)))
    psi = vecs @ cvecs[:, j]
    psi = psi / np.max(np.abs(psi))
    u = np.asarray(point.u, dtype=float) + eps * 2 * np.real(psi)
    par = np.array(point.par, dtype=float)
    par[speed_index] = omega / wavenumber
    prob = translation_constraint(replace(problem, params=list(par)), u, speed_index)
    settings = settings or SteadySettings()
    branch = init_branch(prob, u, settings, direction=direction, par=par)
    branch.on_step = follow_reference
    follow_reference(branch)
    return branch


def _real_vector(v: np.ndarray) -> np.ndarray:
    """Rotate a (nearly real up to phase) eigenvector to a real one."""
    k = int(np.argmax(np.abs(v)))
    r = np.real(v * np.exp(-1j * np.angle(v[k])))
    return r / np.linalg.norm(r)


def propagate(orbit: HopfOrbit, v0: np.ndarray) -> np.ndarray:
    """Slices ``v_j = M_j^{-1} H_j v_{j-1}`` for ``j = 1..m-2`` from ``v_0``; shape (m-1, n_u)."""
    blocks = slice_blocks(orbit.problem, orbit.Y, orbit.t, orbit.T, orbit.par)
    V = np.empty((orbit.m - 1, orbit.problem.nu))
    V[0] = v0
    for j in range(1, orbit.m - 1):
        Mj, Hj = blocks[j]
        V[j] = lu_factor(Mj).solve(Hj @ V[previous_slice(j, orbit.m)])
    return V


def poswibra(orbit: HopfOrbit, ds: float = 0.1, sw: int | str = "auto",
             first_tol: float = 0.5, crit: Optional[tuple] = None) -> HopfOrbit:
    """Predictor off a periodic orbit at a multiplier near ``+1`` or ``-1``.

    ``crit`` is ``(gamma, v)`` of the critical multiplier; by default it is
    recomputed, excluding the trivial multiplier by the angle between its
    eigenvector and ``du/dt``.  For ``-1`` the orbit is doubled and the
    predictor flips sign after one original period.
    """
    from .floquet import floq_fa1, time_derivative_slice
    nu = orbit.problem.nu
    if crit is None:
        fr = floq_fa1(orbit, nu, vectors=True)
        udot = time_derivative_slice(orbit, 0)
        cands = []
        for g, v in zip(fr.multipliers, fr.vectors.T):
            if not np.isfinite(g):
                continue
            vr = _real_vector(v)
            ang = abs(vr @ udot) / max(np.linalg.norm(udot), 1e-300)
            if abs(g - 1) < 0.1 and ang > np.cos(np.deg2rad(10.0)):
                continue
            cands.append((g, v))
        targets = {1: [1.0], -1: [-1.0], "auto": [1.0, -1.0]}[sw]
        best = None
        for g, v in cands:
            for tgt in targets:
                d = abs(g - tgt)
                if d <= 0.2 and (best is None or d < best[0]):
                    best = (d, g, v, int(tgt))
        if best is None:
            listing = ", ".join(f"{g:.4g}" for g, _ in cands[:6])
            raise BranchSwitchError(f"no multiplier within 0.2 of the requested sign; candidates: {listing}")
        _, g, v, sign = best
    else:
        g, v = crit
        sign = 1 if np.real(g) > 0 else -1
        if sw in (1, -1) and sw != sign:
            raise BranchSwitchError(f"critical multiplier {g:.4g} does not match sw={sw}")
    v0 = _real_vector(v)
    V = propagate(orbit, v0)
    s = replace(orbit.settings, first_tol=first_tol, ds=abs(ds))
    if sign == 1:
        Vfull = np.vstack([V, V[:1]])
        base = replace(orbit, settings=s, y0d=None, base=None, tx=None, tp=None)
    else:
        t = orbit.t
        tnew = 0.5 * np.concatenate([t[:-1], 1.0 + t[:-1], [2.0]])
        Y2 = np.vstack([orbit.Y[:-1], orbit.Y[:-1], orbit.Y[:1]])
        Vfull = np.vstack([V, -V, V[:1]])
        base = replace(orbit, Y=Y2, t=tnew, T=2 * orbit.T, settings=s, y0d=None, base=None,
                       tx=None, tp=None)
    x0, p0 = base.unknowns()
    w = base.weights()
    tx = Vfull.ravel()
    tp = np.zeros_like(p0)
    nrm = w.norm(tx, tp)
    direction = 1.0 if ds >= 0 else -1.0
    tx, tp = direction * tx / nrm, direction * tp / nrm
    pred = base.with_unknowns(x0 + abs(ds) * tx, p0, converged=False)
    pred = replace(pred, tx=tx, tp=tp, base=(x0, p0), y0d=base.y0d, label=f"switch at {g:.4g}")
    return pred


def poiniguess(problem: Problem, tmesh: np.ndarray, guess: Callable[[float], np.ndarray], T: float,
               lam: Optional[float] = None, settings: HopfSettings | None = None, par=None) -> HopfOrbit:
    """Orbit from a user guess ``guess(t) -> u`` on a scaled-time mesh."""
    par = np.array(problem.params if par is None else par, dtype=float)
    if lam is not None:
        par[problem.ilam] = lam
    tmesh = np.asarray(tmesh, dtype=float)
    Y = np.array([np.asarray(guess(tj), dtype=float) for tj in tmesh])
    if not np.all(np.isfinite(Y)):
        raise ValueError("guess is not finite on all slices")
    return HopfOrbit(problem, Y, tmesh, float(T), par, settings=settings or HopfSettings(),
                     converged=False, label="initial guess")


def is_degenerate(orbit: HopfOrbit, tol: float = 1e-6) -> bool:
    """True when the orbit has (numerically) zero amplitude in every component."""
    return float(np.max(orbit.Y.max(axis=0) - orbit.Y.min(axis=0))) < tol


@dataclass
class LabFramePeriod:
    multiple: int
    shifts: int
    period: float


def lab_frame_period(speed: float, period: float, length: float, tol: float = 1e-3,
                     max_multiple: int = 64) -> Optional[LabFramePeriod]:
    """Smallest ``m`` with ``m s T`` within ``tol * L`` of a multiple ``q L`` (``q >= 1``).

    A modulated wave of period ``T`` in a frame moving with speed ``s`` is
    periodic in the lab frame with period ``m T``.  Returns ``None`` when
    no ``m <= max_multiple`` resonates.
    """
    if speed == 0 or period <= 0:
        raise ValueError("need a nonzero speed and a positive period")
    shift = abs(speed) * period
    for m in range(1, max_multiple + 1):
        q = int(round(m * shift / length))
        if q >= 1 and abs(m * shift - q * length) <= tol * length:
            return LabFramePeriod(m, q, m * period)
    return None
