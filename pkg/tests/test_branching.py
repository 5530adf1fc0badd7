import numpy as np
import pytest

from hopfcont import branching, hopf, steady
from hopfcont.branching import BranchSwitchError
from hopfcont.demos.cgl import cgl_problem
from hopfcont.demos.masscons import masscons_problem, homogeneous_state


def test_hoswibra_step_length_equals_ds(cgl_trivial, cgl_hps):
    for ds in (0.05, 0.1, 0.2):
        orb = branching.hoswibra(cgl_trivial.problem, cgl_hps[0], ds, tl=20)
        assert abs(branching.predictor_step_length(orb) - ds) <= 1e-10
        orb = branching.hoswibra(cgl_trivial.problem, cgl_hps[1], ds, tl=20, dlam=0.5)
        assert abs(branching.predictor_step_length(orb) - ds) <= 1e-10


def test_hoswibra_frequency_and_period(cgl_trivial, cgl_hps):
    orb = branching.hoswibra(cgl_trivial.problem, cgl_hps[0], 0.1, tl=20)
    assert orb.T > 0
    assert abs(orb.T - 2 * np.pi) <= 1e-8


def test_vertical_predictor_keeps_parameter(cgl_trivial, cgl_hps):
    hp = cgl_hps[0]
    orb = branching.hoswibra(cgl_trivial.problem, hp, 0.1, tl=20, dlam=0)
    assert orb.par[cgl_trivial.problem.ilam] == hp.par[cgl_trivial.problem.ilam]
    assert np.ptp(orb.Y, axis=0).max() > 0


def test_normal_form_of_trivial_cgl_state(cgl_trivial, cgl_hps):
    """Homogeneous mode: |R|^2 = 1/2 - sqrt(1/4 + r) gives r = -|R|^2 + O(|R|^4),
    so with |R| = 2|z| the first Lyapunov coefficient is 4; cos(x) modes see 3/4 of it."""
    nf = branching.hogetnf(cgl_trivial.problem, cgl_hps[0])
    assert abs(nf.mu_r_prime - 1) <= 1e-3
    assert abs(nf.omega - 1) <= 1e-8
    assert not nf.supercritical
    assert abs(nf.re_c1 - 4) <= 1e-3
    nf2 = branching.hogetnf(cgl_trivial.problem, cgl_hps[1])
    assert abs(nf2.mu_r_prime - 1) <= 1e-3
    assert abs(nf2.re_c1 - 3) <= 1e-3


def test_predictor_follows_exact_parabola(cgl_trivial, cgl_hps):
    orb = branching.hoswibra(cgl_trivial.problem, cgl_hps[0], 0.1, tl=20)
    u1, u2 = np.array([orb.problem.components(y) for y in orb.Y]).transpose(1, 0, 2)
    R2 = float(np.max(u1 ** 2 + u2 ** 2))
    exact = R2 ** 2 - R2
    assert abs(orb.lam - exact) <= 1.5 * R2 ** 2


def test_normal_form_rejects_constrained_problem():
    p = masscons_problem(n=20, alpha=-2.0, beta=4.0)
    u = homogeneous_state(p, sign=1)
    pt = steady.BranchPoint(step=0, u=u, par=np.array(p.params), lam=p.params[p.ilam], ptype="HP",
                            counts=(0, 0), crit_value=1j)
    with pytest.raises(BranchSwitchError):
        branching.hogetnf(p, pt)


def test_hopf_eigenbasis_needs_complex_pair(cgl_trivial):
    pt = cgl_trivial.points[0]
    bad = steady.BranchPoint(step=0, u=pt.u, par=pt.par, lam=pt.lam, ptype="BP", counts=(0, 0),
                             crit_value=0.0 + 0j)
    with pytest.raises(BranchSwitchError):
        branching.hoswibra(cgl_trivial.problem, bad, 0.1)


@pytest.fixture(scope="module")
def periodic_hps():
    p = cgl_problem("periodic", n=30).with_params(r=-0.1)
    br = steady.init_branch(p, np.zeros(p.nu), steady.SteadySettings(ds=0.1, dsmax=0.1, neig=20))
    steady.cont_steady(br, 13)
    return p, [q for q in br.special if q.ptype == "HP"]


def test_twswibra_rejects_bad_input(cgl_trivial, cgl_hps, periodic_hps):
    p, hps = periodic_hps
    with pytest.raises(BranchSwitchError):
        branching.twswibra(p, hps[1], 6, 0.0)
    with pytest.raises(BranchSwitchError):
        branching.twswibra(cgl_trivial.problem, cgl_hps[1], 6, 1.0)


def test_twswibra_speed_sign_follows_wavenumber(periodic_hps):
    p, hps = periodic_hps
    s = steady.SteadySettings(ds=0.05, dsmax=0.1, neig=10)
    right = branching.twswibra(p, hps[1], 6, 1.0, eps=0.1, settings=s)
    left = branching.twswibra(p, hps[1], 6, -1.0, eps=0.1, settings=s)
    sr, sl = right.points[0].par[6], left.points[0].par[6]
    assert sr * sl < 0
    assert abs(abs(sr) - abs(sl)) <= 1e-6
    # translation condition holds at the converged start
    pr = right.problem
    assert abs(pr.q(pr, right.points[0].u, right.points[0].par)[0]) <= 1e-8


def test_poswibra_period_doubling_layout(cgl_b1):
    orb = hopf.orbit_from_point(cgl_b1, cgl_b1.points[3])
    v = np.ones(orb.problem.nu) + 0j
    pred = branching.poswibra(orb, 0.1, sw=-1, crit=(-0.99 + 0j, v))
    m = orb.m
    assert pred.m == 2 * m - 1
    assert np.all(np.diff(pred.t) > 0)
    assert pred.t[0] == 0 and pred.t[-1] == 1
    assert abs(pred.T - 2 * orb.T) <= 1e-14
    V = pred.tx[: pred.m * orb.problem.nu].reshape(pred.m, -1)
    half = m - 1
    assert np.allclose(V[half:2 * half], -V[:half])
    assert abs(branching.predictor_step_length(pred) - 0.1) <= 1e-10


def test_poswibra_sign_mismatch_and_missing_candidate(cgl_b1):
    orb = hopf.orbit_from_point(cgl_b1, cgl_b1.points[3])
    v = np.ones(orb.problem.nu) + 0j
    with pytest.raises(BranchSwitchError):
        branching.poswibra(orb, 0.1, sw=1, crit=(-0.99 + 0j, v))
    with pytest.raises(BranchSwitchError):
        branching.poswibra(orb, 0.1, sw=-1)


def test_poiniguess_of_converged_orbit_is_fixed_point(cgl_b1):
    orb = hopf.orbit_from_point(cgl_b1, cgl_b1.points[5])
    table = {float(t): y for t, y in zip(orb.t, orb.Y)}
    guess = branching.poiniguess(orb.problem, orb.t, lambda t: table[float(t)], orb.T, par=orb.par,
                                 settings=orb.settings)
    new, res = hopf.newton_po(guess)
    assert res.converged
    assert res.iterations <= 1
    assert np.max(np.abs(new.Y - orb.Y)) <= 1e-8


def test_steady_guess_is_degenerate(cgl_b1):
    p = cgl_b1.problem
    guess = branching.poiniguess(p, np.linspace(0, 1, 11), lambda t: np.zeros(p.nu), 2 * np.pi, lam=0.1)
    assert branching.is_degenerate(guess)
    assert not branching.is_degenerate(hopf.orbit_from_point(cgl_b1, cgl_b1.points[5]))


@pytest.mark.parametrize("speed,period,length,expected", [
    (1.0, 2 * np.pi, 2 * np.pi, (1, 1, 2 * np.pi)),
    (0.5, 2 * np.pi, 2 * np.pi, (2, 1, 4 * np.pi)),
    (-1.0, np.pi, 2 * np.pi, (2, 1, 2 * np.pi)),
    (2.0, 1.5, 3.0, (1, 1, 1.5)),
])
def test_lab_frame_period_examples(speed, period, length, expected):
    lf = branching.lab_frame_period(speed, period, length)
    assert (lf.multiple, lf.shifts) == expected[:2]
    assert abs(lf.period - expected[2]) <= 1e-12


def test_lab_frame_period_without_resonance():
    assert branching.lab_frame_period(1.0, np.sqrt(2), 1.0, tol=1e-6, max_multiple=10) is None
    with pytest.raises(ValueError):
        branching.lab_frame_period(0.0, 1.0, 1.0)
