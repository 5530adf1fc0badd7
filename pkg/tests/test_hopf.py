from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import linear_problem
from hopfcont import _arclength as al, branching, hopf
from hopfcont.demos import cgl, cglext, ks
from hopfcont.problem import residual


def exact_cgl_orbit(r=0.5, m=21, n=20):
    p = cgl.cgl_problem(n=n, r=r)
    t = np.linspace(0, 1, m)
    return hopf.HopfOrbit(p, cgl.homogeneous_orbit(p, r, t), t, cgl.homogeneous_period(r), p.params)


def test_steady_state_orbit_has_zero_residual(cgl30):
    t = np.linspace(0, 1, 9)
    G = hopf.assemble_G(cgl30, np.zeros((9, cgl30.nu)), t, 3.7, cgl30.params)
    assert not G.any()


def test_exact_orbit_residual_second_order():
    res = []
    for m in (21, 41):
        o = exact_cgl_orbit(m=m)
        res.append(np.abs(hopf.assemble_G(o.problem, o.Y, o.t, o.T, o.par)).max())
    assert 3.5 < res[0] / res[1] < 4.5


def test_algebraic_rows_use_algebraic_form():
    p = ks.ks_problem(n=20)
    rng = np.random.default_rng(0)
    m = 5
    t = np.linspace(0, 1, m)
    Y = rng.standard_normal((m, p.nu))
    Y[-1] = Y[0]
    T = 2.3
    G = hopf.assemble_G(p, Y, t, T, p.params).reshape(m, p.nu)
    alg = ~p.dynamic_mask
    assert alg.any()
    for j in range(m - 1):
        np.testing.assert_allclose(G[j][alg], -0.5 * T * residual(p, Y[j], p.params)[alg], atol=1e-12)


def test_two_slice_block_matrix():
    p = linear_problem(n=6)
    t = np.array([0.0, 1.0])
    Y = np.zeros((2, p.nu))
    (M1, H1), = hopf.slice_blocks(p, Y, t, 1.3, p.params)
    gamma = 0.7
    A = hopf.assemble_Agamma(p, Y, t, 1.3, p.params, gamma).toarray()
    n = p.nu
    eye = np.eye(n)
    expected = np.block([[(M1 - H1).toarray(), np.zeros((n, n))], [-gamma * eye, eye]])
    np.testing.assert_allclose(A, expected, atol=1e-14)


def test_time_derivative_in_kernel(cgl_b1):
    o = cgl_b1.orbit
    A = hopf.assemble_Agamma(o.problem, o.Y, o.t, o.T, o.par)
    U, t, m = o.Y, o.t, o.m
    Ud = np.empty_like(U)
    for j in range(m - 1):
        jp, jn = hopf.previous_slice(j, m), j + 1
        tp = t[jp] - (1.0 if j == 0 else 0.0)
        Ud[j] = (U[jn] - U[jp]) / (t[jn] - tp)
    Ud[-1] = Ud[0]
    assert np.abs(A @ Ud.ravel()).max() <= 10 * o.settings.tol * np.abs(Ud).max()


def test_agamma_matches_fd():
    o = exact_cgl_orbit(m=11, n=10)
    rng = np.random.default_rng(1)
    V = rng.standard_normal(o.Y.shape)
    V[-1] = V[0]
    eps = 1e-6
    G0 = hopf.assemble_G(o.problem, o.Y, o.t, o.T, o.par)
    G1 = hopf.assemble_G(o.problem, o.Y + eps * V, o.t, o.T, o.par)
    A = hopf.assemble_Agamma(o.problem, o.Y, o.t, o.T, o.par)
    fd = (G1 - G0) / eps
    assert np.linalg.norm(fd - A @ V.ravel()) <= 1e-5 * np.linalg.norm(fd)


def test_full_jacobian_consistency():
    o = exact_cgl_orbit(m=11, n=10)
    o = replace(o, par=o.par, Y=o.Y * 1.01)
    sysm = hopf.HopfSystem(o)
    x, p = o.unknowns()
    A, B, C, D = sysm.jacobian(x, p)
    rng = np.random.default_rng(2)
    vx = rng.standard_normal(x.size)
    vp = rng.standard_normal(p.size)
    eps = 1e-6
    rx1, rp1 = sysm.residual(x + eps * vx, p + eps * vp)
    rx0, rp0 = sysm.residual(x - eps * vx, p - eps * vp)
    fdx, fdp = (rx1 - rx0) / (2 * eps), (rp1 - rp0) / (2 * eps)
    jx = A @ vx + B @ vp
    jp = C @ vx + D @ vp
    assert np.linalg.norm(fdx - jx) <= 1e-5 * np.linalg.norm(fdx)
    assert np.linalg.norm(fdp - jp) <= 1e-5 * max(np.linalg.norm(fdp), 1e-12)


def test_phase_condition_properties(cgl_b1):
    o = cgl_b1.orbit
    phi, grad = hopf.phase_condition(o)
    assert abs(phi) <= 1e-10
    const = replace(o, Y=np.tile(o.Y[0], (o.m, 1)), y0d=None)
    assert abs(hopf.phase_condition(const)[0]) <= 1e-10
    assert grad.shape == (o.m * o.problem.nu,)


def test_phase_condition_shift_expansion():
    r, delta = 0.5, 1e-3
    base = exact_cgl_orbit(r=r, m=81, n=20)
    p = base.problem
    shifted = cgl.homogeneous_orbit(p, r, base.t + delta)
    phi, _ = hopf.phase_condition(replace(base, Y=shifted), reference=base)
    R2 = cgl.tw_amplitude_squared(r)
    expected = base.settings.pcfac * delta * (2 * np.pi) ** 2 * R2 * p.mesh.length
    assert abs(phi - expected) <= 0.05 * abs(expected)


def test_arclength_residual(cgl_b1):
    prev = cgl_b1.orbit
    assert hopf.arclength_residual(prev, prev, 0.2) == pytest.approx(-0.2, abs=1e-15)
    x, p = prev.unknowns()
    moved = prev.with_unknowns(x + 0.2 * prev.tx, p + 0.2 * prev.tp)
    assert abs(hopf.arclength_residual(moved, prev, 0.2)) <= 1e-12


def test_arclength_weights_follow_settings(cgl_b1):
    prev = cgl_b1.orbit
    x, p = prev.unknowns()
    dx, dp = 0.01 * np.ones_like(x), np.array([0.3, -0.1])
    moved = prev.with_unknowns(x + dx, p + dp)
    for w_t in (0.1, 0.5, 0.9):
        s = replace(prev.settings, w_t=w_t)
        a, b = replace(prev, settings=s), replace(moved, settings=s)
        xi = 1.0 / (prev.m * prev.problem.nu)
        manual = xi * prev.tx @ dx + (1 - xi) * (w_t * prev.tp[0] * dp[0] + (1 - w_t) * prev.tp[1] * dp[1]) - 0.05
        assert hopf.arclength_residual(b, a, 0.05) == pytest.approx(manual, abs=1e-13)


def test_newton_on_converged_orbit_is_noop(cgl_b1):
    o, res = hopf.newton_po(cgl_b1.orbit)
    assert res.converged and res.iterations <= 1


def test_first_step_from_hopf_predictor(cgl_b1):
    assert cgl_b1.points[1].iterations <= 8


def test_converged_orbit_invariants(cgl_b1):
    for q in cgl_b1.points:
        o = hopf.orbit_from_point(cgl_b1, q)
        x, p = o.unknowns()
        rx, rp = hopf.HopfSystem(o).residual(x, p)
        assert np.abs(rx).max() <= o.settings.tol
        np.testing.assert_array_equal(o.Y[-1], o.Y[0])
        assert abs(hopf.xinorm(o, *q.tangent) - 1.0) <= 1e-10


def test_fold_on_b1(cgl_b1):
    folds = [q for q in cgl_b1.points if q.ptype == "FP"]
    assert len(folds) == 1
    assert abs(folds[0].lam + 0.25) < 0.01


def test_norm_of_constant_orbit():
    p = linear_problem(n=10)
    t = np.linspace(0, 1, 6)
    for c in (0.0, 2.5, -1.25):
        o = hopf.HopfOrbit(p, np.full((6, p.nu), c), t, 1.0, p.params)
        assert o.norm() == pytest.approx(abs(c), rel=1e-14, abs=1e-15)


def test_hopftref_counts_and_clustering():
    o = exact_cgl_orbit(m=21, n=10)
    r = hopf.hopftref(o, 0.5)
    assert r.m == 24
    assert r.t[0] == 0.0 and r.t[-1] == 1.0 and np.all(np.diff(r.t) > 0)
    new = np.setdiff1d(r.t, o.t)
    assert np.all(np.abs(new - 0.5) < 0.1)


def test_hopftref_then_newton_does_not_increase_residual(cgl_b1):
    o = cgl_b1.orbit
    o2, _ = hopf.newton_po(hopf.hopftref(o, hopf.hogradinf(o)))
    r0 = np.abs(hopf.HopfSystem(o).residual(*o.unknowns())[0]).max()
    r1 = np.abs(hopf.HopfSystem(o2).residual(*o2.unknowns())[0]).max()
    assert r1 <= max(r0, o.settings.tol)


def test_hogradinf():
    p = linear_problem(n=4)
    t = np.linspace(0, 1, 41)
    Y = np.cos(2 * np.pi * t)[:, None] * np.ones(p.nu)
    o = hopf.HopfOrbit(p, Y, t, 1.0, p.params)
    assert abs(hopf.hogradinf(o) - 0.25) <= t[1]
    flat = hopf.HopfOrbit(p, np.ones((41, p.nu)), t, 1.0, p.params)
    assert hopf.hogradinf(flat) == t[1]


def test_resume_po_branch_matches(cgl_trivial, cgl_hps):
    p = cgl_trivial.problem
    s = hopf.HopfSettings(ds=0.1, dsmax=0.3)
    full = hopf.init_po_branch(branching.hoswibra(p, cgl_hps[0], 0.1, tl=12, settings=s), 0.1)
    hopf.cont_po(full, 5)
    part = hopf.init_po_branch(branching.hoswibra(p, cgl_hps[0], 0.1, tl=12, settings=s), 0.1)
    hopf.cont_po(part, 2)
    q = part.points[-1]
    resumed = hopf.resume_po_branch(hopf.orbit_from_point(part, q), q.step, q.next_ds)
    hopf.cont_po(resumed, 3)
    for a, b in zip(full.points[-3:], resumed.points[-3:]):
        np.testing.assert_array_equal(a.Y, b.Y)
        assert a.T == b.T


def test_fixed_period_mode():
    pe = replace(cglext.cglext_problem(n=16, r=0.5, alpha=0.0), ilam=7)
    pc = cgl.cgl_problem(n=16, r=0.5)
    tm = np.linspace(0, 1, 21)
    Y = cgl.homogeneous_orbit(pc, 0.5, tm)
    T = cgl.homogeneous_period(0.5)
    s = hopf.HopfSettings(freeT=0, free_param=1, ds=0.1, dsmax=0.1)
    o = branching.poiniguess(pe, tm, lambda t: Y[np.argmin(abs(tm - t))], T, settings=s)
    o, res = hopf.newton_po(o)
    assert res.converged
    br = hopf.init_po_branch(o, 0.1)
    hopf.cont_po(br, 4)
    Ts = {q.T for q in br.points}
    assert Ts == {T}
    nus = np.array([q.par[1] for q in br.points])
    assert np.ptp(nus) > 1e-3


def test_unknown_newton_mode(cgl_b1):
    with pytest.raises(ValueError):
        hopf.newton_po(cgl_b1.orbit, mode="sideways")


def test_orbit_validation(cgl30):
    with pytest.raises(ValueError):
        hopf.HopfOrbit(cgl30, np.zeros((3, cgl30.nu)), [0.0, 0.7, 0.5], 1.0, cgl30.params)
    with pytest.raises(ValueError):
        hopf.HopfOrbit(cgl30, np.zeros((3, 5)), [0.0, 0.5, 1.0], 1.0, cgl30.params)
