"""Floquet multipliers of discrete periodic orbits and orbit bifurcations.

The linearized interval maps are ``M_j v_j = H_j v_{j-1}`` (see
:func:`hopfcont.hopf.slice_blocks`).  The monodromy product multiplies
them out; the lifted pencil instead solves the block-cyclic generalized
eigenproblem ``theta M_j v_j = H_j v_{j-1}`` whose eigenvalues are the
``(m-1)``-th roots of the multipliers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import _arclength as al
from .hopf import (HopfBranch, HopfOrbit, HopfPoint, HopfSystem, _record, compute_y0d,
                   orbit_from_point, previous_slice, slice_blocks)
from .linsys import lu_factor

log = logging.getLogger(__name__)

FA2_SIZE_CAP = 8000
FLTOL_WARN = 1e-6


@dataclass
class FloquetResult:
    """Multipliers sorted by modulus, descending."""

    multipliers: np.ndarray
    err: float
    ind: int = -1
    vectors: Optional[np.ndarray] = None
    unreliable: bool = False

    def nontrivial(self) -> np.ndarray:
        """Multipliers without the one nearest 1."""
        i = int(np.argmin(np.abs(self.multipliers - 1)))
        return np.delete(self.multipliers, i)


def _sort(gam, vecs=None):
    order = np.lexsort((gam.imag, gam.real, -np.abs(gam)))
    return gam[order], (None if vecs is None else vecs[:, order])


def monodromy(orbit: HopfOrbit, start: int = 0) -> np.ndarray:
    """Dense monodromy matrix at slice ``start`` (0-based) by block solves."""
    prob = orbit.problem
    blocks = slice_blocks(prob, orbit.Y, orbit.t, orbit.T, orbit.par)
    nb = len(blocks)
    X = np.eye(prob.nu)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, nb + 1):
            j = (start + k) % nb
            Mj, Hj = blocks[j]
            X = lu_factor(Mj).solve(Hj @ X)
    return X


def floq_fa1(orbit: HopfOrbit, nfloq: int = 20, vectors: bool = False) -> FloquetResult:
    """Multipliers from the monodromy product ``M_1^{-1} H_1 ... M_2^{-1} H_2``."""
    X = monodromy(orbit, 0)
    unreliable = not np.all(np.isfinite(X))
    if unreliable:
        return FloquetResult(np.full(nfloq, np.nan + 0j), np.inf, unreliable=True)
    if vectors:
        gam, V = sla.eig(X)
    else:
        gam, V = sla.eigvals(X), None
    gam, V = _sort(gam, V)
    gam = gam[:nfloq]
    V = None if V is None else V[:, :nfloq]
    finite = np.isfinite(gam)
    err = float(np.min(np.abs(gam[finite] - 1))) if finite.any() else np.inf
    return FloquetResult(gam, err, vectors=V, unreliable=not finite.all())


def lifted_pencil(orbit: HopfOrbit):
    """Dense ``(A_H, B_M)`` of the block-cyclic pencil."""
    prob = orbit.problem
    blocks = slice_blocks(prob, orbit.Y, orbit.t, orbit.T, orbit.par)
    nb, n = len(blocks), prob.nu
    m = orbit.m
    AH = np.zeros((nb * n, nb * n))
    BM = np.zeros((nb * n, nb * n))
    for j, (Mj, Hj) in enumerate(blocks):
        jp = previous_slice(j, m)
        BM[j * n:(j + 1) * n, j * n:(j + 1) * n] = Mj.toarray()
        AH[j * n:(j + 1) * n, jp * n:(jp + 1) * n] = Hj.toarray()
    return AH, BM, nb


def group_roots(theta: np.ndarray, nb: int) -> np.ndarray:
    """Combine ``nb``-fold root sets of the lifted pencil into multipliers.

    Seeds are taken by decreasing modulus; each seed collects the nearest
    unassigned value to every rotation ``theta_s exp(2 pi i k / nb)`` and the
    multiplier is the mean of the ``nb``-th powers of the group.
    """
    theta = theta[np.isfinite(theta)]
    order = np.lexsort((theta.imag, theta.real, -np.abs(theta)))
    theta = theta[order]
    free = np.ones(theta.size, dtype=bool)
    rot = np.exp(2j * np.pi * np.arange(nb) / nb)
    gam = []
    for s in range(theta.size):
        if not free[s]:
            continue
        group = [s]
        free[s] = False
        for r in rot[1:]:
            target = theta[s] * r
            cand = np.flatnonzero(free)
            if cand.size == 0:
                break
            k = cand[np.argmin(np.abs(theta[cand] - target))]
            free[k] = False
            group.append(k)
        gam.append(np.mean(theta[group] ** nb))
    return np.array(gam)


def floq_fa2(orbit: HopfOrbit, size_cap: int = FA2_SIZE_CAP) -> FloquetResult:
    """All multipliers from the QZ spectrum of the lifted pencil (no products)."""
    nb = orbit.m - 1
    size = nb * orbit.problem.nu
    if size > size_cap:
        raise ValueError(f"lifted pencil has size {size} > {size_cap}; use a coarser t- or x-mesh")
    AH, BM, nb = lifted_pencil(orbit)
    theta = sla.eigvals(AH, BM)
    gam = group_roots(theta, nb)
    gam, _ = _sort(gam)
    finite = np.isfinite(gam)
    err = float(np.min(np.abs(gam[finite] - 1))) if finite.any() else np.inf
    return FloquetResult(gam, err, unreliable=not finite.all())


def po_index(result_or_multipliers, fltol: float = 1e-4) -> int:
    """Number of multipliers with ``|gamma| > 1 + fltol``."""
    gam = getattr(result_or_multipliers, "multipliers", result_or_multipliers)
    gam = np.asarray(gam)
    return int(np.sum(np.abs(gam[np.isfinite(gam)]) > 1 + fltol))


def floquet(orbit: HopfOrbit, alg: int = 1, nfloq: int = 20, fltol: float = 1e-4) -> FloquetResult:
    fr = floq_fa2(orbit) if alg == 2 else floq_fa1(orbit, nfloq)
    fr.ind = po_index(fr, fltol)
    return fr


def time_derivative_slice(orbit: HopfOrbit, j: int = 0) -> np.ndarray:
    Y, t, m = orbit.Y, orbit.t, orbit.m
    jp = previous_slice(j, m)
    jn = j + 1
    tp = t[jp] - (1.0 if j == 0 else 0.0)
    return (Y[jn] - Y[jp]) / (t[jn] - tp)


def critical_multiplier(orbit: HopfOrbit, fltol: float = 1e-4, exclude_angle_deg: float = 10.0):
    """Non-trivial multiplier closest to the unit circle with its eigenvector.

    The trivial multiplier is recognized by an eigenvector within
    ``exclude_angle_deg`` of ``du/dt`` at ``t = 0``.
    """
    fr = floq_fa1(orbit, orbit.problem.nu, vectors=True)
    udot = time_derivative_slice(orbit, 0)
    un = np.linalg.norm(udot)
    cands = []
    for g, v in zip(fr.multipliers, fr.vectors.T):
        if not np.isfinite(g):
            continue
        if un > 0:
            vr = np.real(v * np.exp(-1j * np.angle(np.vdot(udot, v))))
            cosang = abs(np.dot(vr, udot)) / (np.linalg.norm(v) * un)
            if cosang > np.cos(np.deg2rad(exclude_angle_deg)) and abs(g - 1) < 0.1:
                continue
        cands.append((abs(abs(g) - 1), g, v))
    if not cands:
        return None, None, fr
    cands.sort(key=lambda c: c[0])
    _, g, v = cands[0]
    return complex(g), v, fr


def classify_multiplier(g: complex, angle_tol: float = 0.1) -> str:
    if abs(np.angle(g)) < angle_tol:
        return "BP"
    if abs(abs(np.angle(g)) - np.pi) < angle_tol:
        return "PD"
    return "NS"


def hobifdetec(branch: HopfBranch, a: HopfPoint, b: HopfPoint) -> list:
    """Bisect between two orbit records whose index differs and classify
    the crossing multiplier (+1 branch point, -1 period doubling, else torus).
    """
    if a.ind == b.ind:
        return []
    s = branch.settings
    oa = orbit_from_point(branch, a)
    ob = orbit_from_point(branch, b)
    xa, pa = oa.unknowns()
    xb, pb = ob.unknowns()
    if xa.size != xb.size:
        return []
    weights = ob.weights()
    lo, hi = 0.0, 1.0
    ind_lo = a.ind
    best = None
    for _ in range(s.bisec):
        mid = 0.5 * (lo + hi)
        ref = ob.with_unknowns(xa + mid * (xb - xa), pa + mid * (pb - pa))
        ref = replace(ref, y0d=compute_y0d(ref.problem, ref.Y, ref.t, ref.T, ref.par, s.y0dsw))
        res = al.hyperplane_solve(HopfSystem(ref), xa, pa, xb, pb, mid, weights, tol=s.tol, maxit=s.maxit)
        if not res.converged:
            log.warning("orbit bisection failed: %s", res.reason)
            break
        cur = ob.with_unknowns(res.x, res.p)
        fr = floq_fa2(cur) if s.flcheck == 2 else floq_fa1(cur, s.nfloq)
        ind = po_index(fr, s.fltol)
        best = (cur, res)
        if ind == ind_lo:
            lo = mid
        else:
            hi = mid
    if best is None:
        ev = replace(b, ptype="BP", warning="bisection failed")
        return [ev]
    cur, res = best
    g, v, fr = critical_multiplier(cur, s.fltol)
    kind = "NS" if g is None else classify_multiplier(g)
    rec = _record(branch, cur, b.step, res.iterations, res.history[-1] if res.history else 0.0)
    rec.ptype = kind
    rec.crit_multiplier = g
    rec.crit_vector = v
    rec.multipliers = fr.multipliers[: s.nfloq]
    rec.err = fr.err
    rec.ind = po_index(fr, s.fltol)
    rec.tangent = (ob.tx.copy(), ob.tp.copy())
    if abs(a.ind - b.ind) > 1 and kind != "NS" and g is not None and abs(g.imag) < 1e-8:
        rec.warning = "index jumped by more than one; several multipliers may cross"
    return [rec]
