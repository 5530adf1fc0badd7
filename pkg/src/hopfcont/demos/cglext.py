"""cGL with a time-periodic multiplicative forcing of the quintic term::

    c5(t, x) = c5 + alpha tanh(10 T ((t - beta) mod 1)) sin x

in scaled time ``t in [0, 1)``.  With ``alpha = 0`` this is the plain cGL.
Orbits are usually computed at fixed period with ``nu`` freed.
"""

from __future__ import annotations

import numpy as np

from ..fem1d import assemble_operators, block_expand, build_mesh
from ..problem import Problem
from ._nodal import semilinear_hooks
from .cgl import DEFAULTS as CGL_DEFAULTS
from .cgl import PARAM_NAMES as CGL_NAMES
from .cgl import _linear, make_cgl_nodal

PARAM_NAMES = CGL_NAMES + ("alpha", "beta")
DEFAULTS = dict(CGL_DEFAULTS, alpha=0.5, beta=0.5)


def forcing(t: float, T: float, beta: float) -> float:
    return float(np.tanh(10 * T * np.mod(t - beta, 1.0)))


def forced_quintic(prob, U, par, t, T):
    x = prob.data["x"]
    return par[4] + par[7] * forcing(t, T, par[8]) * np.sin(x)


def cglext_problem(bc: str = "neumann", n: int = 30, l: float = np.pi, **params) -> Problem:
    par = dict(DEFAULTS)
    par.update(params)
    mesh = build_mesh(l, n, bc)
    ops = assemble_operators(mesh)
    eye2 = np.eye(2)
    nodal_f, nodal_df, nodal_d2f = make_cgl_nodal(forced_quintic)
    rhs, jac, spjac, bpjac = semilinear_hooks(_linear, nodal_f, nodal_df, nodal_d2f)
    return Problem(
        name="cglext", ops=ops, ncomp=2, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=rhs, jac=jac, mass=block_expand(ops.M, eye2), ilam=0, time_dependent=True,
        spjac=spjac, bpjac=bpjac,
        data=dict(K_sys=block_expand(ops.K + ops.Q, eye2), Kx_sys=block_expand(ops.Kx, eye2),
                  load=np.concatenate([ops.bc_load, ops.bc_load]), x=mesh.work_points),
    )
