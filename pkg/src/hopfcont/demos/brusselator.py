"""Extended Brusselator: three species, Neumann boundaries::

    u_t = Du u_xx + a - (1 + b) u + u^2 v - c u + d w
    v_t = Dv v_xx + b u - u^2 v
    w_t = Dw w_xx + c u - d w
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..fem1d import assemble_operators, block_expand, build_mesh
from ..problem import Problem
from ._nodal import semilinear_hooks

PARAM_NAMES = ("a", "b", "c", "d", "Du", "Dv", "Dw")
DEFAULTS = dict(a=0.95, b=2.75, c=1.0, d=1.0, Du=0.01, Dv=0.1, Dw=1.0)
TURING_HOPF_WAVENUMBER = 1.4


def _f(prob, U, par, t, T):
    a, b, c, d = par[:4]
    u, v, w = U
    return np.array([a - (1 + b) * u + u * u * v - c * u + d * w, b * u - u * u * v, c * u - d * w])


def _df(prob, U, par, t, T):
    a, b, c, d = par[:4]
    u, v, _ = U
    one, zero = np.ones_like(u), np.zeros_like(u)
    return np.array([[-(1 + b) + 2 * u * v - c, u * u, d * one],
                     [b - 2 * u * v, -u * u, zero],
                     [c * one, zero, -d * one]])


def _d2f(prob, U, par, t, T):
    u, v, _ = U
    out = np.zeros((3, 3, 3, u.size))
    out[0, 0, 0], out[0, 0, 1], out[0, 1, 0] = 2 * v, 2 * u, 2 * u
    out[1, 0, 0], out[1, 0, 1], out[1, 1, 0] = -2 * v, -2 * u, -2 * u
    return out


def _linear(prob, par, t, T):
    K = prob.data["K"]
    L = sp.block_diag([par[4] * K, par[5] * K, par[6] * K], format="csr")
    return L, prob.data["load"]


def brusselator_problem(n: int = 60, l: float = np.pi / TURING_HOPF_WAVENUMBER, **params) -> Problem:
    par = dict(DEFAULTS)
    par.update(params)
    mesh = build_mesh(l, n, "neumann")
    ops = assemble_operators(mesh)
    rhs, jac, spjac, bpjac = semilinear_hooks(_linear, _f, _df, _d2f)
    return Problem(
        name="brusselator", ops=ops, ncomp=3, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=rhs, jac=jac, mass=block_expand(ops.M, np.eye(3)), ilam=1, spjac=spjac, bpjac=bpjac,
        data=dict(K=(ops.K + ops.Q).tocsr(), load=np.zeros(3 * ops.M.shape[0])),
    )


def homogeneous_state(prob: Problem, par=None) -> np.ndarray:
    """``(a, b/a, a c/d)`` on every node."""
    a, b, c, d = (prob.params if par is None else par)[:4]
    return np.concatenate([np.full(prob.npts, v) for v in (a, b / a, a * c / d)])


def neumann_wavenumbers(l: float = np.pi / TURING_HOPF_WAVENUMBER, count: int = 6) -> np.ndarray:
    return np.arange(count) * np.pi / (2 * l)


def linear_dispersion(k: float, a: float, b: float, c: float = 1.0, d: float = 1.0, Du: float = 0.01,
                      Dv: float = 0.1, Dw: float = 1.0) -> np.ndarray:
    """Growth rates (eigenvalues of the linearized right-hand side) of mode ``k`` at the homogeneous state."""
    J = np.array([[-(1 + b) + 2 * b - c, a * a, d], [b - 2 * b, -a * a, 0.0], [c, 0.0, -d]])
    J -= np.diag([Du, Dv, Dw]) * k * k
    return np.linalg.eigvals(J)
