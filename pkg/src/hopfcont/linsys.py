"""Sparse LU solves, bordered block elimination and shifted eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# above this size the eigen solver switches from dense QZ to shift-invert
DENSE_EIG_LIMIT = 600
# bordered elimination falls back to a monolithic solve above this estimate
BORDER_COND_LIMIT = 1.0e12


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization hits a (numerically) zero pivot."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass
class LUFactor:
    """Sparse LU factorization with a singularity check on the pivots."""

    lu: spla.SuperLU
    shape: tuple

    def solve(self, b, trans: str = "N"):
        return self.lu.solve(np.asarray(b), trans=trans)


def lu_factor(A, rtol: float | None = None) -> LUFactor:
    """Factor a sparse square matrix, raising :class:`SingularMatrixError`."""
    A = sp.csc_matrix(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(f"factorization failed: {exc}") from None
    udiag = np.abs(lu.U.diagonal())
    scale = max(abs(A).max(), np.finfo(float).tiny) if A.nnz else 1.0
    if rtol is None:
        rtol = max(n, 10) * np.finfo(float).eps
    bad = np.flatnonzero(udiag <= rtol * scale)
    if bad.size:
        k = int(bad[0])
        pivot = int(lu.perm_c[k])
        raise SingularMatrixError(f"matrix is singular to working precision (pivot at column {pivot})", pivot)
    return LUFactor(lu, A.shape)


def lu_solve(A, b):
    """Solve ``A x = b`` by sparse LU."""
    return lu_factor(A).solve(b)


@dataclass
class BorderedSystem:
    """``[[A, B], [C, D]] [x; y] = [f; g]`` with a sparse core ``A``."""

    A: object
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    f: np.ndarray
    g: np.ndarray
    used_fallback: bool = field(default=False, init=False)

    def __post_init__(self):
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        k = self.B.shape[1]
        self.C = np.asarray(self.C, dtype=float).reshape(k, n)
        self.D = np.asarray(self.D, dtype=float).reshape(k, k)
        self.f = np.asarray(self.f).reshape(n, *np.shape(self.f)[1:])
        self.g = np.asarray(self.g).reshape(k, *np.shape(self.g)[1:])
        if k < 1:
            raise ValueError("bordered system needs at least one border row")

    def assembled(self) -> sp.csc_matrix:
        return sp.bmat([[sp.csr_matrix(self.A), sp.csr_matrix(self.B)],
                        [sp.csr_matrix(self.C), sp.csr_matrix(self.D)]], format="csc")


def _condest(A, fac: LUFactor) -> float:
    n = A.shape[0]
    inv = spla.LinearOperator((n, n), matvec=lambda v: fac.solve(v),
                              rmatvec=lambda v: fac.solve(v, trans="T"), dtype=float)
    try:
        return float(spla.onenormest(A, t=2) * spla.onenormest(inv, t=2))
    except Exception:
        return np.inf


def solve_bordered(sys: BorderedSystem, check_condition: bool = True):
    """Block elimination on the core ``A``; monolithic LU as fallback."""
    n = sys.A.shape[0]
    fac = None
    try:
        fac = lu_factor(sys.A)
        if check_condition and _condest(sp.csc_matrix(sys.A), fac) > BORDER_COND_LIMIT:
            fac = None
    except SingularMatrixError:
        fac = None
    if fac is not None:
        X = fac.solve(sys.B)
        xf = fac.solve(sys.f)
        S = sys.D - sys.C @ X
        rhs = sys.g - sys.C @ xf
        try:
            y = np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError:
            fac = None
        else:
            x = xf - X @ y
            if np.all(np.isfinite(x)) and np.all(np.isfinite(y)):
                sys.used_fallback = False
                return x, y
    sys.used_fallback = True
    full = lu_factor(sys.assembled())
    sol = full.solve(np.concatenate([sys.f, sys.g]))
    return sol[:n], sol[n:]


def solve_monolithic(A, B, C, D, f, g):
    """Plain sparse LU on the assembled bordered matrix."""
    sys = BorderedSystem(A, B, C, D, f, g)
    n = sys.A.shape[0]
    sol = lu_factor(sys.assembled()).solve(np.concatenate([sys.f, sys.g]))
    return sol[:n], sol[n:]


@dataclass
class ShiftEigs:
    """Eigenpairs nearest one shift, ordered by distance."""

    shift: complex
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    error: str | None = None


def _order(values: np.ndarray, shift: complex) -> np.ndarray:
    dist = np.abs(values - shift)
    return np.lexsort((values.imag, values.real, dist))


def _residuals(A, Mm, values, vectors):
    res = np.empty(values.size)
    for i, (mu, v) in enumerate(zip(values, vectors.T)):
        res[i] = np.linalg.norm(A @ v - mu * (Mm @ v)) / max(np.linalg.norm(v), 1e-300)
    return res


def _refine(A, Mm, mu, v, steps=2):
    """A couple of inverse-iteration sweeps to tighten a dense eigenpair."""
    n = A.shape[0]
    shift = mu + 1e-10 * max(1.0, abs(mu))
    try:
        fac = spla.splu(sp.csc_matrix(A - shift * Mm, dtype=complex))
    except RuntimeError:
        return mu, v
    for _ in range(steps):
        w = fac.solve(Mm @ v)
        nrm = np.linalg.norm(w)
        if not np.isfinite(nrm) or nrm == 0:
            break
        v = w / nrm
        Mv = Mm @ v
        denom = np.vdot(v, Mv)
        if abs(denom) > 0:
            mu = np.vdot(v, A @ v) / denom
    return mu, v


def eigs_near(A, Msys, shifts: Sequence[complex], counts, tol: float = 1e-8) -> list[ShiftEigs]:
    """Generalized eigenvalues of ``A v = mu Msys v`` nearest each shift.

    ``counts`` is an int or one int per shift.  Dense QZ is used up to
    ``DENSE_EIG_LIMIT`` unknowns, shift-invert Arnoldi above.
    """
    shifts = [complex(s) for s in np.atleast_1d(shifts)]
    if np.isscalar(counts):
        counts = [int(counts)] * len(shifts)
    if any(c < 1 for c in counts):
        raise ValueError("eigenvalue counts must be >= 1")
    A = sp.csr_matrix(A)
    Mm = sp.csr_matrix(Msys)
    n = A.shape[0]
    out: list[ShiftEigs] = []
    if n <= DENSE_EIG_LIMIT:
        vals, vecs = sla.eig(A.toarray(), Mm.toarray())
        finite = np.isfinite(vals)
        vals, vecs = vals[finite], vecs[:, finite]
        vecs = vecs / np.linalg.norm(vecs, axis=0)
        for s, c in zip(shifts, counts):
            idx = _order(vals, s)[:c]
            v, w = vals[idx].copy(), vecs[:, idx].copy()
            res = _residuals(A, Mm, v, w)
            for i in np.flatnonzero(res > tol):
                v[i], w[:, i] = _refine(A, Mm, v[i], w[:, i])
            res = _residuals(A, Mm, v, w)
            order = _order(v, s)
            out.append(ShiftEigs(s, v[order], w[:, order], res[order]))
        return out
    for s, c in zip(shifts, counts):
        try:
            fac = spla.splu(sp.csc_matrix(A - s * Mm, dtype=complex))
        except RuntimeError as exc:
            out.append(ShiftEigs(s, np.empty(0, complex), np.empty((n, 0), complex), np.empty(0), str(exc)))
            continue
        op = spla.LinearOperator((n, n), matvec=lambda x, f=fac: f.solve(Mm @ x), dtype=complex)
        v0 = np.random.default_rng(12345).standard_normal(n).astype(complex)
        k = min(c, n - 2)
        nu, w = spla.eigs(op, k=k, which="LM", v0=v0, ncv=min(n - 1, max(2 * k + 1, 20)), tol=1e-13)
        keep = np.abs(nu) > 1e-14
        mu = s + 1.0 / nu[keep]
        w = w[:, keep]
        w = w / np.linalg.norm(w, axis=0)
        res = _residuals(A, Mm, mu, w)
        order = _order(mu, s)
        out.append(ShiftEigs(s, mu[order], w[:, order], res[order]))
    return out
