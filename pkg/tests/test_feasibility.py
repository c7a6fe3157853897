import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxks.feasibility import LAMBDA_SCAN, M_profile, kappa_outer, select_params
from fluxks.problem import make_setup


def test_reference_2d_case_is_feasible():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    rep = select_params(setup)
    assert rep.feasible, rep.reason
    assert all(c.satisfied for c in rep.constraints)
    p = rep.params
    assert p.lam == 0.5
    assert p.kappa == min(rep.kappa_components.values())
    assert p.T_ext == pytest.approx(4 / p.kappa * p.B0**0.25, rel=1e-14)
    assert p.K > 1 and p.K**2 >= p.profile.b_lam * setup.Rn
    # delta is half the root of the 2-d taxis margin
    c1 = lambda d: 2 * ((1 - d) * 2.0 / math.sqrt(1 + d) - 1)
    assert c1(2 * p.delta) == pytest.approx(0.0, abs=1e-12)
    assert p.c1 == pytest.approx(c1(p.delta), rel=1e-14)


def test_b0_is_largest_dyadic_fraction():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    rep = select_params(setup)
    p = rep.params
    ab = p.profile.ab
    start = min(p.K**2 / (4 * ab * ab), 0.5)
    k = math.log2(start / p.B0)
    assert k == pytest.approx(round(k), abs=1e-9)


@pytest.mark.parametrize("n,chi,m,fragment", [
    (2, 0.9, 1.0, "chi <= 1"),
    (1, 2.0, 0.5, "m_c"),
    (1, 2.0, 1.0, "m/omega_1 <= m_c"),
])
def test_infeasible_reasons(n, chi, m, fragment):
    rep = select_params(make_setup(n, 1.0, chi, m))
    assert not rep.feasible
    assert fragment in rep.reason


def test_literal_recipe_accepts_unit_mass_in_1d():
    rep = select_params(make_setup(1, 1.0, 2.0, 1.0), recipe="literal")
    assert rep.feasible
    assert rep.params.lam in LAMBDA_SCAN
    lam = rep.params.lam
    # smallest scanned lambda with m chi / sqrt(1/lam^2 + m^2) > 1
    earlier = [l for l in LAMBDA_SCAN if l < lam]
    assert all(2.0 / math.sqrt(1 / l**2 + 1) <= 1 for l in earlier)


def test_1d_corrected_threshold_is_omega_times_critical_mass():
    mc = 1 / math.sqrt(3)
    assert not select_params(make_setup(1, 1.0, 2.0, 1.99 * mc)).feasible
    assert select_params(make_setup(1, 1.0, 2.0, 3.0 * mc)).feasible


def test_unknown_recipe():
    with pytest.raises(ValueError):
        select_params(make_setup(2, 1.0, 2.0, 0.5), recipe="guess")


def test_constraint_table_format():
    rep = select_params(make_setup(2, 1.0, 2.0, 0.5))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "name,required,actual,satisfied"
    assert len(lines) == len(rep.constraints) + 1
    assert all(line.endswith("true") for line in lines[1:])


def test_threshold_profile_carries_total_mass():
    setup = make_setup(2, 1.0, 2.0, 0.5)
    p = select_params(setup).params
    assert M_profile(p, setup, 1.0) == pytest.approx(0.5, rel=1e-14)
    r = np.linspace(0, 1, 1001)
    assert np.all(np.diff(M_profile(p, setup, r)) >= 0)


def test_kappa_outer_formula():
    setup = make_setup(3, 1.5, 2.0, 1.0)
    from fluxks.profile import PhiProfile
    prof = PhiProfile(0.5)
    K = 2.0
    om = 4 * math.pi
    want = 3 * 1.0 * 2.0 * K / (2 * prof.ab * om * 1.5**3 * math.sqrt(1 + K ** (2 / 3 - 2) / om**2))
    assert kappa_outer(setup, prof, K) == pytest.approx(want, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 3), chi=st.floats(1.2, 4.0), m=st.floats(0.1, 3.0), R=st.floats(0.5, 2.0))
def test_selected_params_satisfy_all_constraints(n, chi, m, R):
    rep = select_params(make_setup(n, R, chi, m))
    if rep.feasible:
        assert not rep.violated()
        assert 0 < rep.params.B0 < 1
        assert rep.params.K * math.sqrt(rep.params.B0) < R**n
