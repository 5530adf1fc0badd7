"""Bordered Newton corrector and pseudo-arclength stepping shared by all branches.

An extended system has a sparse block of unknowns ``x`` and a handful of
scalar unknowns ``p``.  It returns residuals ``(rx, rp)`` with
``len(rp) == len(p) - 1`` and a Jacobian ``(A, B, C, D)``::

    [ A  B ]   d(rx)/d(x, p)
    [ C  D ]   d(rp)/d(x, p)

The missing row is supplied by either an arclength condition or a fixed
value for one of the scalars.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .linsys import BorderedSystem, SingularMatrixError, solve_bordered


class ExtendedSystem(Protocol):
    def residual(self, x: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def jacobian(self, x: np.ndarray, p: np.ndarray): ...


@dataclass
class Weights:
    """Weights of the continuation norm ``wx |x|^2 + sum wp_k p_k^2``."""

    x: float
    p: np.ndarray

    def inner(self, ax, ap, bx, bp) -> float:
        return float(self.x * np.dot(ax, bx) + np.dot(self.p * ap, bp))

    def norm(self, ax, ap) -> float:
        return float(np.sqrt(self.inner(ax, ap, ax, ap)))


@dataclass
class ArclengthRow:
    """``<tau, (x, p) - (x0, p0)>_w - ds``."""

    x0: np.ndarray
    p0: np.ndarray
    tx: np.ndarray
    tp: np.ndarray
    weights: Weights
    ds: float

    def value(self, x, p) -> float:
        return self.weights.inner(self.tx, self.tp, x - self.x0, p - self.p0) - self.ds

    def gradient(self):
        return self.weights.x * self.tx, self.weights.p * self.tp


@dataclass
class FixedRow:
    """``p[index] - target``."""

    index: int
    target: float

    def value(self, x, p) -> float:
        return float(p[self.index] - self.target)

    def gradient_p(self, n: int) -> np.ndarray:
        e = np.zeros(n)
        e[self.index] = 1.0
        return e


@dataclass
class NewtonResult:
    x: np.ndarray
    p: np.ndarray
    converged: bool
    iterations: int
    history: list = field(default_factory=list)
    reason: str = ""


def full_residual(system, x, p, row) -> np.ndarray:
    rx, rp = system.residual(x, p)
    return np.concatenate([rx, rp, [row.value(x, p)]])


def _bordered_jacobian(system, x, p, row):
    A, B, C, D = system.jacobian(x, p)
    B = np.asarray(B, dtype=float).reshape(len(x), len(p))
    C = np.asarray(C, dtype=float).reshape(len(p) - 1, len(x))
    D = np.asarray(D, dtype=float).reshape(len(p) - 1, len(p))
    if isinstance(row, ArclengthRow):
        cx, cp = row.gradient()
    else:
        cx, cp = np.zeros(len(x)), row.gradient_p(len(p))
    return A, B, np.vstack([C, cx]), np.vstack([D, cp])


def newton(system, x, p, row, tol: float = 1e-8, maxit: int = 20, step_tol: float | None = None) -> NewtonResult:
    """Newton's method on the system completed by ``row``.

    Converged when the sup-norm of the full residual is at most ``tol``.
    """
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    history = []
    for it in range(maxit + 1):
        try:
            r = full_residual(system, x, p, row)
        except FloatingPointError as exc:
            return NewtonResult(x, p, False, it, history, f"non-finite residual: {exc}")
        res = float(np.max(np.abs(r))) if r.size else 0.0
        history.append(res)
        if not np.isfinite(res):
            return NewtonResult(x, p, False, it, history, "non-finite residual")
        if res <= tol:
            return NewtonResult(x, p, True, it, history)
        if it == maxit:
            break
        if len(history) > 3 and res > 1e3 * max(history[0], tol):
            return NewtonResult(x, p, False, it, history, "diverging")
        A, B, C, D = _bordered_jacobian(system, x, p, row)
        n = len(x)
        try:
            dx, dp = solve_bordered(BorderedSystem(A, B, C, D, r[:n], r[n:]))
        except (SingularMatrixError, np.linalg.LinAlgError, RuntimeError) as exc:
            return NewtonResult(x, p, False, it, history, f"singular Jacobian: {exc}")
        x = x - dx
        p = p - dp
        if step_tol is not None and max(np.max(np.abs(dx), initial=0), np.max(np.abs(dp))) < step_tol:
            r = full_residual(system, x, p, row)
            res = float(np.max(np.abs(r)))
            history.append(res)
            return NewtonResult(x, p, res <= tol, it + 1, history)
    return NewtonResult(x, p, False, maxit, history, f"no convergence in {maxit} iterations")


def tangent(system, x, p, tx_old, tp_old, weights: Weights):
    """Tangent at a solution, normalized in the weighted norm and oriented
    so that its weighted inner product with the previous tangent is positive."""
    A, B, C, D = system.jacobian(x, p)
    n = len(x)
    B = np.asarray(B, dtype=float).reshape(n, len(p))
    C = np.vstack([np.asarray(C, dtype=float).reshape(len(p) - 1, n), weights.x * tx_old])
    D = np.vstack([np.asarray(D, dtype=float).reshape(len(p) - 1, len(p)), weights.p * tp_old])
    g = np.zeros(len(p))
    g[-1] = 1.0
    tx, tp = solve_bordered(BorderedSystem(A, B, C, D, np.zeros(n), g))
    nrm = weights.norm(tx, tp)
    tx, tp = tx / nrm, tp / nrm
    if weights.inner(tx, tp, tx_old, tp_old) < 0:
        tx, tp = -tx, -tp
    return tx, tp


def initial_tangent(system, x, p, weights: Weights, direction_index: int = 0, sign: float = 1.0):
    """Tangent whose ``p[direction_index]`` component has the given sign."""
    tx0 = np.zeros(len(x))
    tp0 = np.zeros(len(p))
    tp0[direction_index] = 1.0
    tx, tp = tangent(system, x, p, tx0, tp0, weights)
    if np.sign(tp[direction_index]) != np.sign(sign) and tp[direction_index] != 0:
        tx, tp = -tx, -tp
    return tx, tp


@dataclass
class StepControl:
    ds: float = 0.1
    dsmin: float = 1e-6
    dsmax: float = 1.0
    tol: float = 1e-8
    maxit: int = 20
    fast: int = 3
    grow: float = 1.3


@dataclass
class StepOutcome:
    x: np.ndarray
    p: np.ndarray
    tx: np.ndarray
    tp: np.ndarray
    ds_used: float
    ds_next: float
    newton: NewtonResult


class StallError(RuntimeError):
    """Step size fell below ``dsmin`` without a converged step."""


def arclength_step(system, x0, p0, tx, tp, weights: Weights, ctrl: StepControl, ds: float,
                   tol: float | None = None, fixed_first: bool = False) -> StepOutcome:
    """One predictor-corrector step with step-size adaptation.

    Halves ``ds`` on failure; grows it by ``ctrl.grow`` after a fast
    corrector, always within ``[dsmin, dsmax]``.
    """
    tol = ctrl.tol if tol is None else tol
    last = None
    while abs(ds) >= ctrl.dsmin:
        xp, pp = x0 + ds * tx, p0 + ds * tp
        row = ArclengthRow(x0, p0, tx, tp, weights, ds)
        res = newton(system, xp, pp, row, tol=tol, maxit=ctrl.maxit)
        last = res
        if res.converged:
            try:
                ntx, ntp = tangent(system, res.x, res.p, tx, tp, weights)
            except (SingularMatrixError, np.linalg.LinAlgError):
                ds = ds / 2
                continue
            nxt = ds
            if res.iterations <= ctrl.fast:
                nxt = np.sign(ds) * min(abs(ds) * ctrl.grow, ctrl.dsmax)
            return StepOutcome(res.x, res.p, ntx, ntp, ds, nxt, res)
        ds = ds / 2
    reason = last.reason if last is not None else "ds below dsmin"
    raise StallError(f"continuation stalled (ds < {ctrl.dsmin}): {reason}")


def hyperplane_solve(system, xa, pa, xb, pb, s: float, weights: Weights, tol=1e-8, maxit=20) -> NewtonResult:
    """Solution on the hyperplane orthogonal to the secant ``b - a`` through
    ``a + s (b - a)``; used for bisection between two branch points."""
    dx, dp = xb - xa, pb - pa
    x0, p0 = xa + s * dx, pa + s * dp
    row = ArclengthRow(x0, p0, dx, dp, weights, 0.0)
    return newton(system, x0, p0, row, tol=tol, maxit=maxit)
