"""Problem definitions: residual, Jacobian, constraints and FD fallbacks.

A problem describes the semi-discrete system ``M du/dt = -G(u, par)``.  State
vectors are component-major: ``u = (u_1(x_1..x_n), u_2(x_1..x_n), ...)``.
Every hook receives the :class:`Problem` itself first so it can reach the
operators and stored data.

Hook signatures::

    rhs(prob, u, par, t=0.0, T=1.0) -> G                 (n_u,)
    jac(prob, u, par, t=0.0, T=1.0) -> dG/du             sparse (n_u, n_u)
    q(prob, u, par) -> steady constraints                (n_q,)
    qu(prob, u, par) -> dq/du                            (n_q, n_u)
    qh(prob, y, tmesh, par) -> periodic-orbit constraints (n_h,)   y is (m, n_u)
    qhu(prob, y, tmesh, par) -> dqh/dy                   (n_h, m*n_u)
    spjac(prob, u, par, phi) -> d/du (G_u phi)           sparse
    bpjac(prob, u, par, psi) -> d/du (G_u^T psi)         sparse
    objective(prob, u, par) -> float
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .fem1d import Operators

FD_REL_STEP = 1e-6
DERIVATIVE_TOL = 1e-4


class NonFiniteError(FloatingPointError):
    """Residual evaluation produced NaN or inf."""

    def __init__(self, message: str, component: int | None = None, index: int | None = None):
        super().__init__(message)
        self.component = component
        self.index = index


@dataclass(frozen=True)
class Problem:
    """A semi-discrete PDE system together with its continuation metadata.

    ``ilam`` is the index of the primary continuation parameter, ``aux``
    the indices of parameters freed by the steady constraints ``q`` and
    ``hopf_aux`` those freed by the periodic-orbit constraints ``qh``.
    """

    name: str
    ops: Operators
    ncomp: int
    params: np.ndarray
    param_names: tuple
    rhs: Callable
    mass: sp.csr_matrix
    jac: Optional[Callable] = None
    ilam: int = 0
    algebraic: tuple = ()
    time_dependent: bool = False
    aux: tuple = ()
    q: Optional[Callable] = None
    qu: Optional[Callable] = None
    hopf_aux: tuple = ()
    qh: Optional[Callable] = None
    qhu: Optional[Callable] = None
    spjac: Optional[Callable] = None
    bpjac: Optional[Callable] = None
    objective: Optional[Callable] = None
    jac_pattern: Optional[sp.csr_matrix] = None
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", np.array(self.params, dtype=float))
        object.__setattr__(self, "param_names", tuple(self.param_names))
        if len(self.param_names) != self.params.size:
            raise ValueError("parameter names and values differ in length")
        idx = [self.ilam, *self.aux]
        if len(set(idx)) != len(idx) or any(not 0 <= i < self.params.size for i in idx):
            raise ValueError(f"active parameter indices invalid: {idx}")
        hidx = [self.ilam, *self.hopf_aux]
        if len(set(hidx)) != len(hidx) or any(not 0 <= i < self.params.size for i in hidx):
            raise ValueError(f"periodic-orbit parameter indices invalid: {hidx}")
        if self.mass.shape != (self.nu, self.nu):
            raise ValueError("system mass matrix has the wrong size")

    # --- sizes -----------------------------------------------------------
    @property
    def mesh(self):
        return self.ops.mesh

    @property
    def npts(self) -> int:
        return self.ops.mesh.n_work

    @property
    def nu(self) -> int:
        return self.ncomp * self.npts

    @property
    def nq(self) -> int:
        return len(self.aux)

    @property
    def nh(self) -> int:
        return len(self.hopf_aux)

    def pindex(self, name: str) -> int:
        return self.param_names.index(name)

    def with_params(self, **values) -> "Problem":
        par = self.params.copy()
        for k, v in values.items():
            par[self.pindex(k)] = v
        return replace(self, params=par)

    def components(self, u: np.ndarray) -> np.ndarray:
        """View ``u`` as an ``(ncomp, npts)`` array."""
        return np.asarray(u).reshape(self.ncomp, self.npts)

    def component_rows(self, c: int) -> slice:
        return slice(c * self.npts, (c + 1) * self.npts)

    @property
    def dynamic_mask(self) -> np.ndarray:
        mask = np.ones(self.nu, dtype=bool)
        for c in self.algebraic:
            mask[self.component_rows(c)] = False
        return mask

    def pattern(self) -> sp.csr_matrix:
        if self.jac_pattern is not None:
            return sp.csr_matrix(self.jac_pattern)
        ops = self.ops
        local = (abs(ops.M) + abs(ops.K) + abs(ops.Kx) + sp.eye(self.npts)).tocsr()
        local.data[:] = 1.0
        return sp.kron(np.ones((self.ncomp, self.ncomp)), local, format="csr")


# --- evaluation --------------------------------------------------------------

def residual(p: Problem, u, par=None, t: float = 0.0, T: float = 1.0) -> np.ndarray:
    """``G(u, par)`` with a check for non-finite entries."""
    par = p.params if par is None else par
    g = np.asarray(p.rhs(p, np.asarray(u, dtype=float), par, t=t, T=T), dtype=float)
    if g.shape != (p.nu,):
        raise ValueError(f"residual has shape {g.shape}, expected ({p.nu},)")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteError(f"non-finite residual in component {i // p.npts} at node {i % p.npts}",
                             i // p.npts, i)
    return g


def _coloring(pattern: sp.csr_matrix) -> np.ndarray:
    """Greedy column coloring: same-colored columns share no row."""
    pat = sp.csc_matrix(pattern)
    pat.data[:] = 1
    overlap = (pat.T @ pat).tocsr()
    n = pat.shape[1]
    colors = -np.ones(n, dtype=int)
    for j in range(n):
        nbr = overlap.indices[overlap.indptr[j]:overlap.indptr[j + 1]]
        used = set(colors[nbr][colors[nbr] >= 0])
        c = 0
        while c in used:
            c += 1
        colors[j] = c
    return colors


_COLOR_CACHE: dict = {}


def _colors_for(p: Problem):
    key = (id(p.ops), p.ncomp, id(p.jac_pattern))
    hit = _COLOR_CACHE.get(key)
    # ids can be recycled, so keep the owners alive and compare identity
    if hit is None or hit[0] is not p.ops or hit[1] is not p.jac_pattern:
        pat = p.pattern()
        hit = (p.ops, p.jac_pattern, pat, _coloring(pat))
        _COLOR_CACHE[key] = hit
    return hit[2], hit[3]


def fd_jacobian(p: Problem, u, par=None, t: float = 0.0, T: float = 1.0, func=None) -> sp.csr_matrix:
    """Colored central-difference Jacobian with step ``1e-6 (1 + |u_i|)``."""
    par = p.params if par is None else par
    func = func or (lambda v: residual(p, v, par, t, T))
    u = np.asarray(u, dtype=float)
    pat, colors = _colors_for(p)
    pat = sp.csc_matrix(pat)
    steps = FD_REL_STEP * (1.0 + np.abs(u))
    rows_out, cols_out, vals_out = [], [], []
    for c in range(colors.max() + 1):
        cols = np.flatnonzero(colors == c)
        du = np.zeros_like(u)
        du[cols] = steps[cols]
        diff = func(u + du) - func(u - du)
        for j in cols:
            rows = pat.indices[pat.indptr[j]:pat.indptr[j + 1]]
            rows_out.append(rows)
            cols_out.append(np.full(rows.size, j))
            vals_out.append(diff[rows] / (2 * steps[j]))
    J = sp.csr_matrix((np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))),
                      shape=(p.nu, p.nu))
    J.eliminate_zeros()
    return J


def jacobian(p: Problem, u, par=None, t: float = 0.0, T: float = 1.0) -> sp.csr_matrix:
    """Analytic ``G_u`` if the problem provides one, colored FD otherwise."""
    par = p.params if par is None else par
    if p.jac is not None:
        return sp.csr_matrix(p.jac(p, np.asarray(u, dtype=float), par, t=t, T=T))
    return fd_jacobian(p, u, par, t, T)


def param_derivative(p: Problem, u, par, index: int, t: float = 0.0, T: float = 1.0) -> np.ndarray:
    """Central FD of ``G`` with respect to one parameter."""
    par = np.asarray(par, dtype=float)
    h = FD_REL_STEP * (1.0 + abs(par[index]))
    plus, minus = par.copy(), par.copy()
    plus[index] += h
    minus[index] -= h
    return (residual(p, u, plus, t, T) - residual(p, u, minus, t, T)) / (2 * h)


def constraints(p: Problem, u, par=None) -> np.ndarray:
    if p.q is None or p.nq == 0:
        return np.zeros(0)
    par = p.params if par is None else par
    return np.atleast_1d(np.asarray(p.q(p, u, par), dtype=float))


def constraint_jacobian(p: Problem, u, par=None) -> np.ndarray:
    """Dense ``dq/du``; FD if no analytic derivative is given."""
    if p.q is None or p.nq == 0:
        return np.zeros((0, p.nu))
    par = p.params if par is None else par
    if p.qu is not None:
        out = p.qu(p, u, par)
        return np.atleast_2d(out.toarray() if sp.issparse(out) else np.asarray(out, dtype=float))
    return _dense_fd(lambda v: constraints(p, v, par), u)


def _dense_fd(func, x):
    x = np.asarray(x, dtype=float)
    f0 = func(x)
    out = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = FD_REL_STEP * (1 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        out[:, j] = (func(x + e) - func(x - e)) / (2 * h)
    return out


def hopf_constraints(p: Problem, y, tmesh, par) -> np.ndarray:
    if p.qh is None or p.nh == 0:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(p.qh(p, y, tmesh, par), dtype=float))


def hopf_constraint_jacobian(p: Problem, y, tmesh, par) -> np.ndarray:
    if p.qh is None or p.nh == 0:
        return np.zeros((0, np.size(y)))
    if p.qhu is not None:
        out = p.qhu(p, y, tmesh, par)
        return np.atleast_2d(out.toarray() if sp.issparse(out) else np.asarray(out, dtype=float))
    shape = np.shape(y)
    return _dense_fd(lambda v: hopf_constraints(p, v.reshape(shape), tmesh, par), np.ravel(y))


def spjac_fd(p: Problem, u, par, phi) -> sp.csr_matrix:
    """``d/du (G_u(u) phi)`` from two Jacobian evaluations.

    Mixed partials commute, so the derivative of ``G_u phi`` in direction
    ``e_k`` equals the derivative of ``G_u e_k`` in direction ``phi``.
    """
    phi = np.asarray(phi, dtype=float)
    scale = max(np.linalg.norm(phi, np.inf), 1e-300)
    h = 1e-4 * (1.0 + np.linalg.norm(u, np.inf)) / scale
    return sp.csr_matrix((jacobian(p, u + h * phi, par) - jacobian(p, u - h * phi, par)) / (2 * h))


def bpjac_fd(p: Problem, u, par, psi) -> sp.csr_matrix:
    """``d/du (G_u(u)^T psi)``, the Hessian of ``psi . G``, by colored FD."""
    u = np.asarray(u, dtype=float)
    psi = np.asarray(psi, dtype=float)
    pat, colors = _colors_for(p)
    # Hessian couples nodes two apart; widen the pattern accordingly.
    pat2 = (pat.T @ pat).tocsc()
    pat2.data[:] = 1
    cols2 = _coloring(pat2)
    steps = 1e-4 * (1.0 + np.abs(u))
    rows_out, cols_out, vals_out = [], [], []
    for c in range(cols2.max() + 1):
        cols = np.flatnonzero(cols2 == c)
        du = np.zeros_like(u)
        du[cols] = steps[cols]
        diff = jacobian(p, u + du, par).T @ psi - jacobian(p, u - du, par).T @ psi
        for j in cols:
            rows = pat2.indices[pat2.indptr[j]:pat2.indptr[j + 1]]
            rows_out.append(rows)
            cols_out.append(np.full(rows.size, j))
            vals_out.append(diff[rows] / (2 * steps[j]))
    H = sp.csr_matrix((np.concatenate(vals_out), (np.concatenate(rows_out), np.concatenate(cols_out))),
                      shape=(p.nu, p.nu))
    H.eliminate_zeros()
    return H


def spjac(p: Problem, u, par, phi) -> sp.csr_matrix:
    if p.spjac is not None:
        return sp.csr_matrix(p.spjac(p, u, par, phi))
    return spjac_fd(p, u, par, phi)


def bpjac(p: Problem, u, par, psi) -> sp.csr_matrix:
    if p.bpjac is not None:
        return sp.csr_matrix(p.bpjac(p, u, par, psi))
    return bpjac_fd(p, u, par, psi)


# --- derivative checking -----------------------------------------------------

@dataclass
class DerivativeCheck:
    name: str
    max_rel_error: float
    location: tuple | None

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= DERIVATIVE_TOL


@dataclass
class DerivativeReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> DerivativeCheck:
        return max(self.checks, key=lambda c: c.max_rel_error)

    def __str__(self):
        lines = [f"{c.name:8s} max rel err {c.max_rel_error:.2e} at {c.location} "
                 f"{'ok' if c.passed else 'FAIL'}" for c in self.checks]
        return "\n".join(lines)


def _compare(name, exact, approx) -> DerivativeCheck:
    exact = exact.toarray() if sp.issparse(exact) else np.atleast_2d(np.asarray(exact, dtype=float))
    approx = approx.toarray() if sp.issparse(approx) else np.atleast_2d(np.asarray(approx, dtype=float))
    diff = np.abs(exact - approx)
    scale = max(np.abs(approx).max(initial=0.0), 1e-12)
    if diff.size == 0:
        return DerivativeCheck(name, 0.0, None)
    loc = np.unravel_index(np.argmax(diff), diff.shape)
    return DerivativeCheck(name, float(diff[loc] / scale), tuple(int(i) for i in loc))


def _full_fd_jacobian(p: Problem, u, par):
    # Dense, uncolored, so that it does not share assumptions with fd_jacobian.
    return _dense_fd(lambda v: residual(p, v, par), u)


def check_derivatives(p: Problem, u, par=None, y=None, tmesh=None, direction=None) -> DerivativeReport:
    """Compare the user derivative hooks against finite differences.

    Reports the largest discrepancy relative to the largest FD entry and
    where it occurs.  ``y``/``tmesh`` enable the ``qh`` check.
    """
    par = p.params if par is None else par
    u = np.asarray(u, dtype=float)
    checks = []
    if p.jac is not None:
        checks.append(_compare("jac", jacobian(p, u, par), _full_fd_jacobian(p, u, par)))
    if p.q is not None and p.qu is not None and p.nq:
        fd = _dense_fd(lambda v: constraints(p, v, par), u)
        checks.append(_compare("q", constraint_jacobian(p, u, par), fd))
    if p.qh is not None and p.qhu is not None and p.nh and y is not None:
        shape = np.shape(y)
        fd = _dense_fd(lambda v: hopf_constraints(p, v.reshape(shape), tmesh, par), np.ravel(y))
        checks.append(_compare("qh", hopf_constraint_jacobian(p, y, tmesh, par), fd))
    if direction is None:
        direction = np.random.default_rng(7).standard_normal(p.nu)
    if p.spjac is not None:
        checks.append(_compare("spjac", p.spjac(p, u, par, direction), spjac_fd(p, u, par, direction)))
    if p.bpjac is not None:
        checks.append(_compare("bpjac", p.bpjac(p, u, par, direction), bpjac_fd(p, u, par, direction)))
    return DerivativeReport(checks)


def taylor_orders(func, jac_apply, x, v, eps: Sequence[float] = (1e-3, 1e-4, 1e-5)) -> np.ndarray:
    """Observed orders of ``|f(x + e v) - f(x) - e J v|`` across ``eps``."""
    f0 = func(x)
    jv = jac_apply(v)
    errs = np.array([np.linalg.norm(func(x + e * v) - f0 - e * jv) for e in eps])
    return np.log(errs[:-1] / errs[1:]) / np.log(np.asarray(eps[:-1]) / np.asarray(eps[1:]))
