"""Shared problems and (session-cached) branches."""

import numpy as np
import pytest

from hopfcont import branching, hopf, steady
from hopfcont.demos.cgl import cgl_problem
from hopfcont.fem1d import assemble_operators, block_expand, build_mesh
from hopfcont.problem import Problem


def linear_problem(n=30, l=np.pi, c=1.0, bc="neumann", ncomp=1):
    """``u_t = u_xx - c u`` written as ``M u' = -(K + c M) u``."""
    ops = assemble_operators(build_mesh(l, n, bc))
    eye = np.eye(ncomp)
    K = block_expand(ops.K, eye)
    M = block_expand(ops.M, eye)

    def rhs(prob, u, par, t=0.0, T=1.0):
        return K @ u + par[0] * (M @ u)

    def jac(prob, u, par, t=0.0, T=1.0):
        return (K + par[0] * M).tocsr()

    return Problem(name="linear", ops=ops, ncomp=ncomp, params=[c], param_names=("c",), rhs=rhs,
                   jac=jac, mass=M)


@pytest.fixture(scope="session")
def cgl30():
    return cgl_problem("neumann", n=30)


@pytest.fixture(scope="session")
def cgl_trivial(cgl30):
    """Trivial cGL branch from r=-0.1 through the first three Hopf points."""
    p = cgl30.with_params(r=-0.1)
    br = steady.init_branch(p, np.zeros(p.nu), steady.SteadySettings(ds=0.1, dsmax=0.1, neig=20))
    steady.cont_steady(br, 14)
    return br


@pytest.fixture(scope="session")
def cgl_hps(cgl_trivial):
    return [q for q in cgl_trivial.special if q.ptype == "HP"]


def _po_branch(problem, hp, steps, tl=20):
    orb = branching.hoswibra(problem, hp, 0.1, tl=tl, settings=hopf.HopfSettings(ds=0.1, dsmax=0.3))
    br = hopf.init_po_branch(orb, 0.1)
    hopf.cont_po(br, steps)
    return br


@pytest.fixture(scope="session")
def cgl_b1(cgl_trivial, cgl_hps):
    return _po_branch(cgl_trivial.problem, cgl_hps[0], 12)


@pytest.fixture(scope="session")
def cgl_b2(cgl_trivial, cgl_hps):
    return _po_branch(cgl_trivial.problem, cgl_hps[1], 10)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
