"""Helpers for semilinear systems ``G(u) = L u - M f(u)`` with a nodal ``f``."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def nodal_blocks(coeffs: np.ndarray) -> sp.csr_matrix:
    """Sparse matrix with diagonal blocks: block ``(i, a)`` is ``diag(coeffs[i, a])``."""
    N, _, n = coeffs.shape
    rows, cols, vals = [], [], []
    base = np.arange(n)
    for i in range(N):
        for a in range(N):
            c = coeffs[i, a]
            if np.any(c != 0):
                rows.append(i * n + base)
                cols.append(a * n + base)
                vals.append(c)
    if not vals:
        return sp.csr_matrix((N * n, N * n))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(N * n, N * n))


def semilinear_hooks(linear, nodal_f, nodal_df, nodal_d2f=None):
    """Build ``rhs``, ``jac`` and (when ``nodal_d2f`` is given) ``spjac``
    and ``bpjac`` hooks.

    ``linear(prob, par, t, T)`` returns ``(L, load)`` so that
    ``G = L u - load - M f``.  ``nodal_f(prob, U, par, t, T)`` maps the
    ``(N, n)`` nodal array to ``(N, n)``; ``nodal_df`` returns ``(N, N, n)``
    with ``[i, a] = df_i/du_a`` and ``nodal_d2f`` returns ``(N, N, N, n)``
    with ``[i, a, b] = d2 f_i / du_a du_b``.
    """

    def rhs(prob, u, par, t=0.0, T=1.0):
        L, load = linear(prob, par, t, T)
        f = nodal_f(prob, prob.components(u), par, t, T).ravel()
        return L @ u - load - prob.mass @ f

    def jac(prob, u, par, t=0.0, T=1.0):
        L, _ = linear(prob, par, t, T)
        df = nodal_df(prob, prob.components(u), par, t, T)
        return (L - prob.mass @ nodal_blocks(df)).tocsr()

    if nodal_d2f is None:
        return rhs, jac, None, None

    def spjac(prob, u, par, phi):
        d2 = nodal_d2f(prob, prob.components(u), par, 0.0, 1.0)
        ph = prob.components(np.asarray(phi, dtype=float))
        coeff = np.einsum("iabn,an->ibn", d2, ph)
        return (-(prob.mass @ nodal_blocks(coeff))).tocsr()

    def bpjac(prob, u, par, psi):
        d2 = nodal_d2f(prob, prob.components(u), par, 0.0, 1.0)
        z = prob.components(prob.mass.T @ np.asarray(psi, dtype=float))
        coeff = np.einsum("iabn,in->abn", d2, z)
        return (-nodal_blocks(coeff)).tocsr()

    return rhs, jac, spjac, bpjac
