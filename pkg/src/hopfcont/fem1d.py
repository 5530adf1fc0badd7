"""One-dimensional P1 finite elements on uniform meshes.

The operators follow the usual conventions:

* ``M[i, j] = int phi_i phi_j``            (mass)
* ``K[i, j] = int phi_i' phi_j'``          (stiffness, so ``-u''`` ~ ``M^{-1} K u``)
* ``Kx[i, j] = int phi_i phi_j'``          (advection, ``u'`` ~ ``M^{-1} Kx u``)

Periodic meshes keep the full set of points for assembly; the working
operators live on the reduced index set obtained by identifying the last
point with the first one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

NEUMANN = "neumann"
DIRICHLET = "dirichlet"
ROBIN = "robin"
PERIODIC = "periodic"
_KINDS = (NEUMANN, DIRICHLET, ROBIN, PERIODIC)

# Dirichlet rows are enforced by a stiff spring of this relative strength.
DIRICHLET_PENALTY = 1.0e3


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition at one endpoint.

    Robin data means ``du/dn + q u = g``.  For Dirichlet, ``g`` is the
    boundary value.
    """

    kind: str = NEUMANN
    q: float = 0.0
    g: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown boundary condition {self.kind!r}")


BCSpec = Union[str, BoundaryCondition, Sequence]


def _as_bc(spec) -> BoundaryCondition:
    if isinstance(spec, BoundaryCondition):
        return spec
    if isinstance(spec, str):
        return BoundaryCondition(spec.lower())
    raise TypeError(f"cannot interpret boundary condition {spec!r}")


@dataclass(frozen=True)
class Mesh1D:
    """Uniform grid on ``(-l, l)``."""

    points: np.ndarray
    left: BoundaryCondition
    right: BoundaryCondition

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise ValueError("a mesh needs at least 3 points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("mesh points must be strictly increasing")
        if not np.isclose(pts[0], -pts[-1]):
            raise ValueError("mesh must be symmetric, endpoints -l and l")
        if (self.left.kind == PERIODIC) != (self.right.kind == PERIODIC):
            raise ValueError("periodic boundary conditions need both endpoints periodic")

    @property
    def n_p(self) -> int:
        return self.points.size

    @property
    def half_length(self) -> float:
        return float(self.points[-1])

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def h(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def periodic(self) -> bool:
        return self.left.kind == PERIODIC

    @property
    def n_work(self) -> int:
        """Number of unknowns per component after periodic identification."""
        return self.n_p - 1 if self.periodic else self.n_p

    @property
    def work_points(self) -> np.ndarray:
        return self.points[: self.n_work]

    def bc_label(self) -> str:
        if self.left.kind == self.right.kind:
            return self.left.kind
        return f"{self.left.kind}/{self.right.kind}"


def build_mesh(l: float, n: int, bc: BCSpec = NEUMANN) -> Mesh1D:
    """Uniform mesh with ``n`` intervals on ``(-l, l)``.

    ``bc`` is either one specification for both ends or a pair
    ``(left, right)``; each entry may be a kind name or a
    :class:`BoundaryCondition`.
    """
    if not np.isfinite(l) or l <= 0:
        raise ValueError(f"half-length must be positive, got {l}")
    if int(n) != n or n < 2:
        raise ValueError(f"interval count must be an integer >= 2, got {n}")
    if isinstance(bc, (str, BoundaryCondition)):
        left = right = _as_bc(bc)
    else:
        left, right = (_as_bc(b) for b in bc)
    points = np.linspace(-l, l, int(n) + 1)
    return Mesh1D(points, left, right)


@dataclass(frozen=True)
class Operators:
    """Scalar FEM matrices of a mesh.

    ``M_full`` etc. live on all mesh points.  ``M``, ``K``, ``Kx`` and ``Q``
    are the working matrices, which coincide with the full ones unless the
    mesh is periodic; then they are ``fill.T @ A @ fill``.  ``bc_load`` is the
    Robin/Dirichlet load vector belonging to ``Q``.
    """

    mesh: Mesh1D
    M_full: sp.csr_matrix
    K_full: sp.csr_matrix
    Kx_full: sp.csr_matrix
    Q_full: sp.csr_matrix
    bc_load_full: np.ndarray
    fill: sp.csr_matrix | None = None
    drop: sp.csr_matrix | None = None
    M: sp.csr_matrix = field(init=False)
    K: sp.csr_matrix = field(init=False)
    Kx: sp.csr_matrix = field(init=False)
    Q: sp.csr_matrix = field(init=False)
    bc_load: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("M", "K", "Kx", "Q"):
            object.__setattr__(self, name, self.transform(getattr(self, name + "_full")))
        load = self.bc_load_full
        if self.fill is not None:
            load = self.fill.T @ load
        object.__setattr__(self, "bc_load", np.asarray(load, dtype=float))

    def transform(self, A):
        """Map a full-grid operator to the working index set."""
        if self.fill is None:
            return sp.csr_matrix(A)
        return sp.csr_matrix(self.fill.T @ A @ self.fill)

    def to_full(self, v: np.ndarray) -> np.ndarray:
        """Expand working-set nodal values to all mesh points."""
        return v if self.fill is None else self.fill @ v

    def to_work(self, v: np.ndarray) -> np.ndarray:
        """Restrict full-grid nodal values to the working index set."""
        return v if self.drop is None else self.drop @ v


def _element_assembly(points: np.ndarray):
    n_p = points.size
    h = np.diff(points)
    rows = np.concatenate([np.arange(n_p - 1), np.arange(n_p - 1), np.arange(1, n_p), np.arange(1, n_p)])
    cols = np.concatenate([np.arange(n_p - 1), np.arange(1, n_p), np.arange(n_p - 1), np.arange(1, n_p)])

    def assemble(a, b, c, d):
        # local element matrix [[a, b], [c, d]] per element (arrays over elements)
        vals = np.concatenate([a, b, c, d])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_p, n_p))

    M = assemble(h / 3, h / 6, h / 6, h / 3)
    K = assemble(1 / h, -1 / h, -1 / h, 1 / h)
    half = 0.5 * np.ones_like(h)
    Kx = assemble(-half, half, -half, half)
    return M, K, Kx


def assemble_operators(mesh: Mesh1D) -> Operators:
    """Exact P1 element integrals plus boundary terms and periodic transforms."""
    M, K, Kx = _element_assembly(mesh.points)
    n_p = mesh.n_p
    qdiag = np.zeros(n_p)
    load = np.zeros(n_p)
    penalty = DIRICHLET_PENALTY * abs(K).max()
    for idx, bc in ((0, mesh.left), (n_p - 1, mesh.right)):
        if bc.kind == ROBIN:
            qdiag[idx] += bc.q
            load[idx] += bc.g
        elif bc.kind == DIRICHLET:
            qdiag[idx] += penalty
            load[idx] += penalty * bc.g
    Q = sp.diags(qdiag).tocsr()
    fill = drop = None
    if mesh.periodic:
        n_r = n_p - 1
        fill = sp.csr_matrix(
            (np.ones(n_p), (np.arange(n_p), np.r_[np.arange(n_r), 0])), shape=(n_p, n_r)
        )
        drop = sp.csr_matrix((np.ones(n_r), (np.arange(n_r), np.arange(n_r))), shape=(n_r, n_p))
    return Operators(mesh, M, K, Kx, Q, load, fill, drop)


def block_expand(op, pattern) -> sp.csr_matrix:
    """N-component block matrix whose block ``(i, j)`` is ``pattern[i, j] * op``."""
    pattern = np.atleast_2d(np.asarray(pattern, dtype=float))
    if not np.all(np.isfinite(pattern)):
        raise ValueError("block pattern must be finite")
    return sp.kron(sp.csr_matrix(pattern), sp.csr_matrix(op), format="csr")
