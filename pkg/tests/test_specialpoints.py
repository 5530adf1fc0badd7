from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg as sla

from hopfcont import specialpoints as spc
from hopfcont import steady
from hopfcont.demos import brusselator, cgl
from hopfcont.linsys import eigs_near
from hopfcont.problem import bpjac_fd, jacobian, spjac_fd


@pytest.fixture(scope="module")
def bruss():
    p = brusselator.brusselator_problem()
    u = brusselator.homogeneous_state(p)
    w = steady.initeig(p, u)
    br = steady.init_branch(p, u, steady.SteadySettings(ds=0.01, dsmax=0.01, neig=10, shifts=(0, 1j * w)))
    steady.cont_steady(br, 25)
    hps = [q for q in br.special if q.ptype == "HP"]
    bps = [q for q in br.special if q.ptype == "BP"]
    return br, hps, bps


def _critical_real_part(problem, u, par, omega):
    res = eigs_near(jacobian(problem, u, par), problem.mass, [1j * omega], 1)[0]
    return res.values[0]


def test_hploc_matches_discrete_cgl_eigenvalue(cgl_trivial, cgl_hps):
    p = cgl_trivial.problem
    # the Hopf values of the trivial state are the eigenvalues of M^{-1} K (one component)
    K = (p.ops.K + p.ops.Q).toarray()
    kvals = np.sort(sla.eigvalsh(K, p.ops.M.toarray()))
    for hp, expected in zip(cgl_hps, kvals):
        st = spc.hpcontini(p, hp, 3)
        st = replace(st, p=st.p + np.array([0.0, 0.02, 0.0]))
        st = spc.hploc(st)
        assert abs(st.lam - expected) <= 1e-8
        assert abs(st.p[0] - 1.0) <= 1e-8


def test_hploc_brusselator(bruss):
    br, hps, _ = bruss
    for hp in hps:
        st = spc.hpcontini(br.problem, hp, 0)
        st = replace(st, p=st.p + np.array([0.01, 0.005, 0.0]))
        st = spc.hploc(st)
        mu = _critical_real_part(br.problem, st.u, st.par, st.p[0])
        assert abs(mu.real) <= 1e-10
        assert abs(abs(mu.imag) - st.p[0]) <= 1e-8


def test_first_brusselator_hopf_frequency(bruss):
    _, hps, _ = bruss
    omega = abs(hps[0].crit_value.imag)
    assert abs(omega - 0.9375) <= 0.1 * 0.9375


def test_hopf_curve_stays_on_hopf_set(bruss):
    br, hps, _ = bruss
    st = spc.hploc(spc.hpcontini(br.problem, hps[0], 0))
    for direction in (1, -1):
        curve = spc.hpcont(st, 4, direction=direction)
        assert len(curve.points) == 5
        for pt in curve.points:
            mu = _critical_real_part(br.problem, pt.u, pt.par, pt.extra)
            assert abs(mu.real) <= 1e-6
            assert abs(abs(mu.imag) - pt.extra) <= 1e-6
        assert np.ptp(curve.lam_w()[:, 1]) > 0


def test_branch_curve_keeps_zero_eigenvalue(bruss):
    br, _, bps = bruss
    st = spc.bploc(spc.bpcontini(br.problem, bps[0], 0))
    psi = st.x[br.problem.nu:]
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10
    curve = spc.bpcont(st, 4)
    for pt in curve.points:
        val = eigs_near(jacobian(br.problem, pt.u, pt.par), br.problem.mass, [0.0], 1)[0].values[0]
        assert abs(val) <= 1e-6
        assert abs(pt.extra) <= 1e-6


def test_exit_and_redetect(bruss):
    br, hps, _ = bruss
    st = spc.hploc(spc.hpcontini(br.problem, hps[0], 0))
    curve = spc.hpcont(st, 3, direction=1)
    target = curve.points[-1]
    u, par = spc.hpcontexit(replace(curve.state))
    assert np.allclose(u, target.u) and np.allclose(par, target.par)
    start = par.copy()
    start[br.problem.ilam] -= 0.03
    res = steady.newton_steady(br.problem, u, start, tol=1e-10, maxit=20)
    assert res.converged
    w = abs(target.extra)
    s = steady.SteadySettings(ds=0.01, dsmax=0.01, neig=10, shifts=(0, 1j * w))
    sub = steady.init_branch(br.problem, res.x, s, par=start)
    steady.cont_steady(sub, 5)
    found = [q.lam for q in sub.special if q.ptype == "HP"]
    assert found and min(abs(f - target.lam) for f in found) <= 1e-4


def test_hopf_jacobian_block_pattern(bruss):
    br, hps, _ = bruss
    st = spc.hpcontini(br.problem, hps[0], 0)
    n = br.problem.nu
    pat = spc.hopf_jacobian_pattern(st).toarray()
    assert pat.shape == (3 * n, 3 * n)
    assert not pat[:n, n:].any()
    for i in range(3):
        assert pat[i * n:(i + 1) * n, i * n:(i + 1) * n].any()
    assert pat[n:2 * n, 2 * n:].any() and pat[2 * n:, n:2 * n].any()


def test_extended_systems_are_regular(bruss):
    br, hps, bps = bruss
    for st in (spc.hploc(spc.hpcontini(br.problem, hps[0], 0)), spc.bploc(spc.bpcontini(br.problem, bps[0], 0))):
        A, B, C, D = st.system.jacobian(st.x, st.p)
        full = np.block([[A.toarray(), B[:, :2]], [C, D[:, :2]]])
        assert full.shape[0] == full.shape[1]
        assert sla.svdvals(full).min() > 1e-8


def test_normalization_orthogonal_to_real_part_raises(bruss):
    br, hps, _ = bruss
    st = spc.hpcontini(br.problem, hps[0], 0)
    n = br.problem.nu
    x = st.x.copy()
    x[n:2 * n] = 0.0
    with pytest.raises(ValueError):
        spc.hploc(replace(st, x=x))


def test_constrained_problem_rejected():
    from hopfcont.demos.masscons import masscons_problem, homogeneous_state
    p = masscons_problem(n=20)
    u = homogeneous_state(p)
    pt = steady.BranchPoint(step=0, u=u, par=np.array(p.params), lam=p.params[p.ilam], ptype="HP",
                            counts=(), crit_value=1j, crit_vector=np.ones(p.nu) + 0j)
    with pytest.raises(ValueError):
        spc.hpcontini(p, pt, 1)


@pytest.mark.parametrize("make", [lambda: brusselator.brusselator_problem(n=20),
                                  lambda: cgl.cgl_problem(n=20, r=0.3)])
def test_analytic_second_derivatives_match_fd(make):
    p = make()
    assert p.spjac is not None and p.bpjac is not None
    rng = np.random.default_rng(3)
    u = 0.5 + 0.3 * rng.standard_normal(p.nu)
    v = rng.standard_normal(p.nu)
    par = np.array(p.params)
    a, f = p.spjac(p, u, par, v).toarray(), spjac_fd(p, u, par, v).toarray()
    assert np.max(np.abs(a - f)) <= 1e-4 * max(1.0, np.max(np.abs(a)))
    a, f = p.bpjac(p, u, par, v).toarray(), bpjac_fd(p, u, par, v).toarray()
    assert np.max(np.abs(a - f)) <= 1e-4 * max(1.0, np.max(np.abs(a)))
