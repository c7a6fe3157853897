import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxks.feasibility import M_profile, select_params
from fluxks.problem import RadialState, make_setup, reconstruct_u_v, total_mass
from fluxks.solver import (OUTCOMES, SolverConfig, ThresholdError, _min_defect, concentrated_state,
                           init_from_threshold, make_grid, run, state_from_profile, step,
                           threshold_profile, uniform_state)
from fluxks.subsolution import w_lower


def test_config_validation():
    for bad in (dict(s_nodes=8), dict(cfl=1.0), dict(grading=2.5), dict(t_end=0.0),
                dict(scheme="rk4"), dict(blowup_threshold=-1.0)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    assert SolverConfig().grading_for(1) == 1.0
    assert SolverConfig().grading_for(3) == 1.5


def test_grid_endpoints_and_grading():
    setup = make_setup(2, 1.3, 2.0, 0.5)
    s = make_grid(setup, 101, 1.5)
    assert s[0] == 0.0 and s[-1] == setup.Rn
    assert np.all(np.diff(s) > 0)
    assert np.all(np.diff(np.diff(s)) > 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_steady_linear_profile_is_preserved(n):
    setup = make_setup(n, 1.0, 2.0, 0.7)
    s = make_grid(setup, 129, 1.0 if n == 1 else 1.5)
    state = RadialState(s, setup.w_total * s / setup.Rn)
    w0 = state.w.copy()
    cfg = SolverConfig(s_nodes=129)
    for _ in range(1000):
        state = step(state, setup, cfg)
    assert np.max(np.abs(state.w - w0)) <= 1e-8 * setup.w_total


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 3), chi=st.floats(0.5, 3.0), eps=st.floats(-0.9, 0.9),
       scheme=st.sampled_from(["euler", "heun"]))
def test_step_keeps_pins_and_monotonicity(n, chi, eps, scheme):
    setup = make_setup(n, 1.0, chi, 0.8)
    s = make_grid(setup, 65, 1.0)
    state = uniform_state(setup, s, eps)
    cfg = SolverConfig(s_nodes=65, scheme=scheme)
    for _ in range(50):
        state = step(state, setup, cfg)
        assert state.w[0] == 0.0
        assert state.w[-1] == setup.w_total
        assert np.all(np.diff(state.w) >= 0)


def _solve(setup, nodes, t_end):
    s = make_grid(setup, nodes, 1.0)
    state = uniform_state(setup, s, 0.5)
    return run(state, setup, SolverConfig(s_nodes=nodes, t_end=t_end, grading=1.0)).final_state.w


@pytest.mark.parametrize("n,chi,m", [(1, 2.0, 0.4), (2, 1.5, 0.5)])
def test_refinement_order(n, chi, m):
    setup = make_setup(n, 1.0, chi, m)
    ref = _solve(setup, 513, 0.1)
    errs = []
    for nodes in (65, 129, 257):
        k = (513 - 1) // (nodes - 1)
        errs.append(np.max(np.abs(_solve(setup, nodes, 0.1) - ref[::k])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0), orders


def test_uniform_state_matches_cosine_mass():
    setup = make_setup(1, 1.0, 2.0, 2.0)
    s = make_grid(setup, 201)
    state = uniform_state(setup, s, 0.3)
    # u = 1 + 0.3 cos(pi r) already has unit half-mass, so w = r + 0.3 sin(pi r)/pi
    assert np.allclose(state.w, s + 0.3 * np.sin(np.pi * s) / np.pi, atol=1e-8)
    with pytest.raises(ValueError):
        uniform_state(setup, s, 1.0)


def test_concentrated_state_holds_core_fraction():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    s = make_grid(setup, 513, 2.0)
    state = concentrated_state(setup, s, 0.05, 0.8)
    assert total_mass(state, setup) == pytest.approx(0.5, rel=1e-12)
    # more than 80% of the mass lies inside r = 3 widths
    i = np.searchsorted(s, (3 * 0.05) ** 2)
    assert state.w[i] / state.w[-1] > 0.8


def test_custom_profile_positivity():
    setup = make_setup(1, 1.0, 2.0, 0.4)
    s = make_grid(setup, 33)
    r = np.linspace(0, 1, 11)
    with pytest.raises(ValueError, match="negative"):
        state_from_profile(setup, s, r, np.cos(4 * r))


@pytest.fixture(scope="module")
def threshold_case():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    return setup, select_params(setup).params


def test_threshold_data_dominates(threshold_case):
    setup, p = threshold_case
    s = make_grid(setup, 257, 2.0)
    state = init_from_threshold(p, setup, s, margin=0.05)
    assert state.w[-1] == pytest.approx(1.05 * setup.w_total, rel=1e-10)
    assert np.all(state.w >= w_lower(p, setup, s, 0.0))
    r = np.linspace(0, 1, 1000)
    # int_{B_r} u0 = omega_n w0(r^n) against the mass threshold M(r)
    w0 = threshold_profile(p, setup, margin=0.05)
    assert np.all(setup.omega_n * w0(r**2) >= M_profile(p, setup, r))


def test_threshold_data_without_smoothing_is_the_threshold(threshold_case):
    setup, p = threshold_case
    s = make_grid(setup, 257, 2.0)
    state = init_from_threshold(p, setup, s, width=0.0, margin=0.0, floor=0.0)
    assert np.allclose(state.w, w_lower(p, setup, s, 0.0), rtol=0, atol=1e-15)


def test_threshold_smoothing_too_wide(threshold_case):
    setup, p = threshold_case
    s = make_grid(setup, 65, 2.0)
    with pytest.raises(ThresholdError, match="smaller smoothing width"):
        init_from_threshold(p, setup, s, width=3 * p.B0, margin=0.0)


def test_compiled_defect_matches_reference(threshold_case):
    setup, p = threshold_case
    s = make_grid(setup, 301, 2.0)
    w = setup.w_total * np.sqrt(s)
    prof = p.profile
    mp = np.array([prof.lam, prof.a_lam, prof.b_lam, p.K, p.B0, p.kappa, setup.n])
    for t in (0.0, 0.4 * p.T_ext, 0.95 * p.T_ext):
        want = np.min(w - w_lower(p, setup, s, t))
        assert _min_defect(s, w, t, mp, setup.Rn, setup.w_total) == pytest.approx(want, abs=1e-15)
    assert math.isnan(_min_defect(s, w, p.T_ext, mp, setup.Rn, setup.w_total))


def test_subcritical_run_report():
    setup = make_setup(1, 1.0, 2.0, 0.4)
    s = make_grid(setup, 65)
    rep = run(uniform_state(setup, s, 0.1), setup, SolverConfig(s_nodes=65, t_end=0.5, trace_points=20))
    assert rep.outcome == "bounded_at_horizon" and rep.outcome in OUTCOMES
    assert rep.t_final == pytest.approx(0.5)
    assert rep.max_sup_u() <= 10 * rep.sup_u0
    assert rep.max_mass_drift() <= 1e-12
    assert rep.T_ext is None and rep.comparison_held is None
    assert rep.max_clamp <= 1e-6 * setup.w_total
    lines = rep.trace_csv().splitlines()
    assert lines[0] == "t,sup_u,min_defect,mass,dt"
    assert len(lines) >= 21
    assert '"outcome": "bounded_at_horizon"' in rep.to_json()
    # the profile relaxes towards the uniform density mu
    _, u, _ = reconstruct_u_v(rep.final_state, setup)
    assert np.max(np.abs(u - setup.mu)) < 0.1 * 0.4 * setup.mu


def test_supercritical_2d_run_detects_collapse():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    s = make_grid(setup, 257, 2.0)
    state = concentrated_state(setup, s, 0.03, 0.9)
    rep = run(state, setup, SolverConfig(s_nodes=257, grading=2.0, t_end=2.0))
    assert rep.outcome == "blew_up"
    assert rep.t_detect is not None and rep.t_detect < 2.0
    assert rep.trace["sup_u"][-1] >= rep.u_detect
    assert np.all(np.diff(rep.final_state.w) >= 0)


def test_monitored_run_on_threshold_data(threshold_case):
    setup, p = threshold_case
    s = make_grid(setup, 129, 2.0)
    state = init_from_threshold(p, setup, s)
    rep = run(state, setup, SolverConfig(s_nodes=129, grading=2.0, t_end=0.2 * p.T_ext), p)
    assert rep.T_ext == p.T_ext
    assert rep.trace["min_defect"][0] >= 0
    assert rep.comparison_held
    assert rep.max_mass_drift() <= 1e-12
