"""Two-species system with a conserved total mass::

    u1_t = u1_xx + d2 u2_xx + f,   u2_t = u2_xx - f,   f = alpha u1 - u1^3 + beta u1 u2

on ``(-pi, pi)`` with Neumann boundaries.  The mass ``(1/|Omega|) int u1 + u2``
is fixed by a constraint; on periodic orbits it is imposed on the average
over the slices.

Because the summed equations vanish identically, no kinetic parameter can
serve as the free parameter of the constraint.  A source ``eps`` in the
first equation unfolds the conservation law instead; it is zero at every
solution.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..fem1d import assemble_operators, block_expand, build_mesh
from ..problem import Problem
from ._nodal import semilinear_hooks

PARAM_NAMES = ("alpha", "beta", "m", "d2", "eps")
DEFAULTS = dict(alpha=1.0, beta=1.0, m=0.0, d2=10.0, eps=0.0)


def _f(prob, U, par, t, T):
    alpha, beta = par[0], par[1]
    u1, u2 = U
    f = alpha * u1 - u1 ** 3 + beta * u1 * u2
    return np.array([f, -f])


def _df(prob, U, par, t, T):
    alpha, beta = par[0], par[1]
    u1, u2 = U
    f1 = alpha - 3 * u1 ** 2 + beta * u2
    f2 = beta * u1
    return np.array([[f1, f2], [-f1, -f2]])


def _d2f(prob, U, par, t, T):
    beta = par[1]
    u1, _ = U
    out = np.zeros((2, 2, 2, u1.size))
    out[0, 0, 0] = -6 * u1
    out[0, 0, 1] = out[0, 1, 0] = beta
    out[1] = -out[0]
    return out


def _linear(prob, par, t, T):
    K = prob.data["K"]
    source = np.concatenate([par[4] * prob.data["ones_M"], np.zeros(prob.npts)])
    return sp.bmat([[K, par[3] * K], [None, K]], format="csr"), prob.data["load"] - source


def mean_mass(prob: Problem, u: np.ndarray) -> float:
    u1, u2 = prob.components(u)
    return float(prob.data["ones_M"] @ (u1 + u2)) / prob.mesh.length


def _q(prob, u, par):
    return np.array([mean_mass(prob, u) - par[2]])


def _qu(prob, u, par):
    w = prob.data["ones_M"] / prob.mesh.length
    return np.concatenate([w, w])[None, :]


def slice_masses(prob: Problem, Y: np.ndarray, par) -> np.ndarray:
    """Mass defect of every distinct slice."""
    return np.array([mean_mass(prob, y) - par[2] for y in Y[:-1]])


def _qh(prob, Y, tmesh, par):
    return np.array([slice_masses(prob, Y, par).mean()])


def _qhu(prob, Y, tmesh, par):
    m = Y.shape[0]
    row = np.zeros((m, prob.nu))
    row[:-1] = _qu(prob, Y[0], par)[0] / (m - 1)
    return row.reshape(1, -1)


def masscons_problem(n: int = 50, l: float = np.pi, **params) -> Problem:
    par = dict(DEFAULTS)
    par.update(params)
    mesh = build_mesh(l, n, "neumann")
    ops = assemble_operators(mesh)
    rhs, jac, spjac, bpjac = semilinear_hooks(_linear, _f, _df, _d2f)
    return Problem(
        name="masscons", ops=ops, ncomp=2, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=rhs, jac=jac, mass=block_expand(ops.M, np.eye(2)), ilam=0, aux=(4,), q=_q, qu=_qu,
        hopf_aux=(4,), qh=_qh, qhu=_qhu, spjac=spjac, bpjac=bpjac,
        data=dict(K=(ops.K + ops.Q).tocsr(), load=np.zeros(2 * ops.M.shape[0]),
                  ones_M=np.asarray(ops.M.sum(axis=0)).ravel()),
    )


def homogeneous_state(prob: Problem, sign: int = -1) -> np.ndarray:
    """``u2 = -u1`` with ``u1 = -beta/2 + sign sqrt(beta^2/4 + alpha)`` (zero mass)."""
    alpha, beta = prob.params[:2]
    u1 = -beta / 2 + sign * np.sqrt(beta ** 2 / 4 + alpha)
    return np.concatenate([np.full(prob.npts, u1), np.full(prob.npts, -u1)])
