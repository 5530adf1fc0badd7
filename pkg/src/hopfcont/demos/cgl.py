"""Cubic-quintic complex Ginzburg-Landau equation in real form.

With ``u = u1 + i u2``::

    u_t = u_xx + (r + i nu) u - (c3 + i mu)|u|^2 u - c5 |u|^4 u + s u_x

and ``delta`` scaling the ``nu`` coupling of the second component, which
breaks the phase invariance when ``delta != 1``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..fem1d import assemble_operators, block_expand, build_mesh
from ..problem import Problem
from ._nodal import semilinear_hooks

PARAM_NAMES = ("r", "nu", "mu", "c3", "c5", "delta", "s")
DEFAULTS = dict(r=-0.1, nu=1.0, mu=0.1, c3=-1.0, c5=1.0, delta=1.0, s=0.0)


def quintic_coefficient(prob, U, par, t, T):
    """``c5`` at the nodes; constant here, forcing variants override it."""
    return np.full(U.shape[1], par[4])


def make_cgl_nodal(c5_field=quintic_coefficient):
    def nodal_f(prob, U, par, t, T):
        r, nu, mu, c3, _, delta, _ = par[:7]
        c5 = c5_field(prob, U, par, t, T)
        u1, u2 = U
        g = u1 ** 2 + u2 ** 2
        f1 = r * u1 - nu * u2 - g * (c3 * u1 - mu * u2) - c5 * g ** 2 * u1
        f2 = delta ** 2 * nu * u1 + r * u2 - g * (mu * u1 + c3 * u2) - c5 * g ** 2 * u2
        return np.array([f1, f2])

    def nodal_df(prob, U, par, t, T):
        r, nu, mu, c3, _, delta, _ = par[:7]
        c5 = c5_field(prob, U, par, t, T)
        C = np.array([[c3, -mu], [mu, c3]])
        L = np.array([[r, -nu], [delta ** 2 * nu, r]])
        g = U[0] ** 2 + U[1] ** 2
        CU = np.einsum("ia,an->in", C, U)
        out = np.empty((2, 2, U.shape[1]))
        for i in range(2):
            for a in range(2):
                out[i, a] = (L[i, a] - 2 * U[a] * CU[i] - g * C[i, a]
                             - c5 * (4 * g * U[a] * U[i] + g ** 2 * (i == a)))
        return out

    def nodal_d2f(prob, U, par, t, T):
        _, _, mu, c3, _, _, _ = par[:7]
        c5 = c5_field(prob, U, par, t, T)
        C = np.array([[c3, -mu], [mu, c3]])
        g = U[0] ** 2 + U[1] ** 2
        CU = np.einsum("ia,an->in", C, U)
        out = np.empty((2, 2, 2, U.shape[1]))
        for i in range(2):
            for a in range(2):
                for b in range(2):
                    out[i, a, b] = (-2 * (a == b) * CU[i] - 2 * U[a] * C[i, b] - 2 * U[b] * C[i, a]
                                    - c5 * (8 * U[a] * U[b] * U[i] + 4 * g * ((a == b) * U[i]
                                            + (i == b) * U[a] + (i == a) * U[b])))
        return out

    return nodal_f, nodal_df, nodal_d2f


def _linear(prob, par, t, T):
    d = prob.data
    L = d["K_sys"]
    if par[6] != 0.0:
        L = L - par[6] * d["Kx_sys"]
    return L, d["load"]


def cgl_problem(bc: str = "neumann", n: int = 30, l: float = np.pi, with_advection: bool = False,
                **params) -> Problem:
    """cGL on ``(-l, l)``; ``with_advection`` only documents intent, the
    advection term is active whenever ``s != 0``."""
    par = dict(DEFAULTS)
    if bc == "periodic":
        par["mu"] = 0.5
    par.update(params)
    mesh = build_mesh(l, n, bc)
    ops = assemble_operators(mesh)
    eye2 = np.eye(2)
    M_sys = block_expand(ops.M, eye2)
    K_sys = block_expand(ops.K + ops.Q, eye2)
    load = np.concatenate([ops.bc_load, ops.bc_load])
    nodal_f, nodal_df, nodal_d2f = make_cgl_nodal()
    rhs, jac, spjac, bpjac = semilinear_hooks(_linear, nodal_f, nodal_df, nodal_d2f)
    return Problem(
        name="cgl", ops=ops, ncomp=2, params=[par[k] for k in PARAM_NAMES], param_names=PARAM_NAMES,
        rhs=rhs, jac=jac, mass=M_sys, ilam=0, spjac=spjac, bpjac=bpjac,
        data=dict(K_sys=K_sys, Kx_sys=block_expand(ops.Kx, eye2), load=load,
                  with_advection=with_advection),
    )


def hopf_points(l: float = np.pi, kmax: int = 3, bc: str = "neumann") -> np.ndarray:
    """Hopf parameters ``r = k^2`` of the trivial state.

    Neumann modes are ``cos(k (x + l))`` with ``k = j pi / (2 l)``; periodic
    modes have ``k = j pi / l``."""
    j = np.arange(kmax)
    k = j * np.pi / (2 * l) if bc == "neumann" else j * np.pi / l
    return k ** 2


def tw_amplitude_squared(r: float, k: float = 0.0, c3: float = -1.0, c5: float = 1.0, branch: int = 1) -> float:
    """``|R|^2`` of the plane-wave family ``R exp(i(omega t - k x))``."""
    disc = c3 ** 2 / (4 * c5 ** 2) + r - k ** 2
    return -c3 / (2 * c5) + branch * np.sqrt(disc)


def tw_frequency(r: float, k: float = 0.0, nu: float = 1.0, mu: float = 0.1, c3: float = -1.0,
                 c5: float = 1.0, branch: int = 1) -> float:
    return nu - mu * tw_amplitude_squared(r, k, c3, c5, branch)


def homogeneous_period(r: float, nu: float = 1.0, mu: float = 0.1, c3: float = -1.0, c5: float = 1.0,
                       branch: int = 1) -> float:
    return 2 * np.pi / tw_frequency(r, 0.0, nu, mu, c3, c5, branch)


def homogeneous_orbit(prob: Problem, r: float, tmesh: np.ndarray, branch: int = 1) -> np.ndarray:
    """Exact spatially homogeneous orbit ``(R cos wt, R sin wt)`` on slices; shape (m, n_u)."""
    par = prob.params
    R = np.sqrt(tw_amplitude_squared(r, 0.0, par[3], par[4], branch))
    w = par[1] - par[2] * R ** 2
    T = 2 * np.pi / w
    npts = prob.npts
    y = np.empty((tmesh.size, prob.nu))
    for j, t in enumerate(tmesh):
        y[j, :npts] = R * np.cos(w * T * t)
        y[j, npts:] = R * np.sin(w * T * t)
    return y


def advection_operator(prob: Problem) -> sp.csr_matrix:
    return prob.data["Kx_sys"]
