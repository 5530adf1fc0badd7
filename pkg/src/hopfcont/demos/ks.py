"""Kuramoto-Sivashinsky equation ``u_t = -alpha u_xxxx - u_xx - (u^2/2)_x`` as a
second-order system with an algebraic second component ``v = u_xx``.

Periodic on ``(-2, 2)``.  Parameters are ``(alpha, m, s, eps)``: ``m`` the
prescribed mass, ``s`` a frame speed and ``eps`` a constant source.  The
mass constraint frees ``eps``; a translation condition freeing ``s`` can be
switched on once the solution is not homogeneous.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import scipy.sparse as sp

from ..fem1d import assemble_operators, build_mesh
from ..problem import Problem

PARAM_NAMES = ("alpha", "m", "s", "eps")
DEFAULTS = dict(alpha=0.5, m=0.0, s=0.0, eps=0.0)


def _rhs(prob, u, par, t=0.0, T=1.0):
    d = prob.data
    alpha, _, s, eps = par[:4]
    u1, u2 = prob.components(u)
    K, M, Kx = d["K"], d["M"], d["Kx"]
    g1 = -(K @ u1 + alpha * (K @ u2)) + 0.5 * (Kx @ (u1 * u1)) - s * (Kx @ u1) - eps * d["ones_M"]
    g2 = -(K @ u1 + M @ u2)
    return np.concatenate([g1, g2])


def _jac(prob, u, par, t=0.0, T=1.0):
    d = prob.data
    alpha, _, s, _ = par[:4]
    u1, _ = prob.components(u)
    K, M, Kx = d["K"], d["M"], d["Kx"]
    A11 = -K + Kx @ sp.diags(u1) - s * Kx
    return sp.bmat([[A11, -alpha * K], [-K, -M]], format="csr")


def _spjac(prob, u, par, phi):
    ph1, _ = prob.components(np.asarray(phi, dtype=float))
    Kx = prob.data["Kx"]
    n = prob.npts
    z = sp.csr_matrix((n, n))
    return sp.bmat([[Kx @ sp.diags(ph1), z], [z, z]], format="csr")


def _bpjac(prob, u, par, psi):
    p1, _ = prob.components(np.asarray(psi, dtype=float))
    n = prob.npts
    z = sp.csr_matrix((n, n))
    return sp.bmat([[sp.diags(prob.data["Kx"].T @ p1), z], [z, z]], format="csr")


def mean_mass(prob: Problem, u: np.ndarray) -> float:
    return float(prob.data["ones_M"] @ prob.components(u)[0]) / prob.mesh.length


def _q_mass(prob, u, par):
    return np.array([mean_mass(prob, u) - par[1]])


def _qu_mass(prob, u, par):
    return np.concatenate([prob.data["ones_M"] / prob.mesh.length, np.zeros(prob.npts)])[None, :]


def _q_both(prob, u, par):
    ref = prob.data["u_ref"]
    return np.array([mean_mass(prob, u) - par[1], prob.data["Kx_sys"] @ ref @ (u - ref)])


def _qu_both(prob, u, par):
    ref = prob.data["u_ref"]
    return np.vstack([_qu_mass(prob, u, par), (prob.data["Kx_sys"] @ ref)[None, :]])


def _qh(prob, Y, tmesh, par):
    return np.array([np.mean([mean_mass(prob, y) for y in Y[:-1]]) - par[1]])


def _qhu(prob, Y, tmesh, par):
    m = Y.shape[0]
    row = np.zeros((m, prob.nu))
    row[:-1] = _qu_mass(prob, Y[0], par)[0] / (m - 1)
    return row.reshape(1, -1)


def ks_problem(n: int = 100, l: float = 2.0, **params) -> Problem:
    par = dict(DEFAULTS)
    par.update(params)
    mesh = build_mesh(l, n, "periodic")
    ops = assemble_operators(mesh)
    M = ops.M.tocsr()
    npts = M.shape[0]
    z = sp.csr_matrix((npts, npts))
    mass = sp.bmat([[M, z], [z, z]], format="csr")
    Kx_sys = sp.bmat([[ops.Kx, z], [z, z]], format="csr")
    return Problem(
        name="ks", ops=ops, ncomp=2, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=_rhs, jac=_jac, mass=mass, ilam=0, algebraic=(1,), aux=(3,), q=_q_mass, qu=_qu_mass,
        hopf_aux=(3,), qh=_qh, qhu=_qhu, spjac=_spjac, bpjac=_bpjac,
        data=dict(K=ops.K.tocsr(), M=M, Kx=ops.Kx.tocsr(), Kx_sys=Kx_sys,
                  ones_M=np.asarray(M.sum(axis=0)).ravel()),
    )


def with_translation(prob: Problem, reference: np.ndarray) -> Problem:
    """Add the translation condition ``(Kx u*)^T (u - u*) = 0`` freeing ``s``."""
    data = dict(prob.data)
    data["u_ref"] = np.array(reference, dtype=float)
    data["ks_translation"] = True
    return replace(prob, aux=(3, 2), q=_q_both, qu=_qu_both, data=data)


def bifurcation_points(kmax: int = 3, l: float = 2.0) -> np.ndarray:
    """``alpha_k = (l / (k pi))^2`` where the linear growth rate ``k^2 - alpha k^4`` of mode ``k pi / l`` vanishes."""
    k = np.arange(1, kmax + 1)
    return (l / (k * np.pi)) ** 2
