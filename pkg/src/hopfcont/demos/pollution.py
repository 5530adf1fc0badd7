"""Canonical system of a spatially distributed pollution control problem.

Unknowns ``(v1, v2, l1, l2)`` (emissions, stock and their shadow prices)
with ``G = K_D u - M f``, ``D = diag(d1, d2, -d1, -d2)`` and::

    f = (-k, v1 - a(v2), rho l1 - p - l2, (rho + a'(v2)) l2 + beta),   k = -(1 + l1)/gamma

where ``a(v) = v - c v^2``.  The backward diffusion of the co-states makes
the system ill posed as an initial value problem, and the Floquet
multipliers of its orbits span many orders of magnitude.  The Jacobian is
left to finite differences.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..fem1d import assemble_operators, block_expand, build_mesh
from ..problem import Problem

PARAM_NAMES = ("rho", "p", "beta", "gamma", "c", "d1", "d2")
DEFAULTS = dict(rho=1.0, p=1.0, beta=0.6, gamma=1.0, c=0.025, d1=0.01, d2=0.01)


def control(l1, gamma):
    return -(1 + l1) / gamma


def _nodal(par, U):
    rho, p, beta, gamma, c = par[:5]
    v1, v2, l1, l2 = U
    k = control(l1, gamma)
    return np.array([-k, v1 - (v2 - c * v2 ** 2), rho * l1 - p - l2, (rho + 1 - 2 * c * v2) * l2 + beta])


def _rhs(prob, u, par, t=0.0, T=1.0):
    d1, d2 = par[5], par[6]
    K = prob.data["K"]
    L = sp.block_diag([d1 * K, d2 * K, -d1 * K, -d2 * K], format="csr")
    f = _nodal(par, prob.components(u)).ravel()
    return L @ u - prob.mass @ f


def canonical_steady_state(prob: Problem, par=None) -> np.ndarray:
    """Spatially homogeneous steady state in closed form."""
    rho, p, beta, gamma, c = (prob.params if par is None else par)[:5]
    l1 = -1.0
    l2 = rho * l1 - p
    slope = -beta / l2 - rho
    v2 = (1 - slope) / (2 * c)
    v1 = v2 - c * v2 ** 2
    return np.concatenate([np.full(prob.npts, v) for v in (v1, v2, l1, l2)])


def current_value(prob: Problem, u: np.ndarray, par=None) -> float:
    """Spatial average of ``p v1 - beta v2 - k - k^2/(2 gamma)``."""
    rho, p, beta, gamma = (prob.params if par is None else par)[:4]
    v1, v2, l1, _ = prob.components(u)
    k = control(l1, gamma)
    jc = p * v1 - beta * v2 - (k + k ** 2 / (2 * gamma))
    return float(prob.data["ones_M"] @ jc) / prob.mesh.length


def _objective(prob, u, par):
    return current_value(prob, u, par)


def orbit_objective(prob: Problem, Y: np.ndarray, tmesh: np.ndarray, par=None) -> float:
    """Time average of the current value over one period (trapezoidal rule)."""
    vals = np.array([current_value(prob, y, par) for y in Y])
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(tmesh)))


def saddle_defect(ind: int, nu: int) -> float:
    """``ind - n_u / 2``; zero when exactly half of the multipliers are unstable."""
    return ind - nu / 2


def pollution_problem(n: int = 40, l: float = np.pi / 2, **params) -> Problem:
    par = dict(DEFAULTS)
    par.update(params)
    mesh = build_mesh(l, n, "neumann")
    ops = assemble_operators(mesh)
    return Problem(
        name="pollution", ops=ops, ncomp=4, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=_rhs, mass=block_expand(ops.M, np.eye(4)), ilam=2, objective=_objective,
        data=dict(K=(ops.K + ops.Q).tocsr(), ones_M=np.asarray(ops.M.sum(axis=0)).ravel(), ill_posed_ivp=True),
    )
