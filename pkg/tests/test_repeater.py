import pytest

from wrep.purification import epp_attractor, epp_fixed_point
from wrep.repeater import (
    NonOperationalError,
    RepeaterRoundResult,
    repeater_resources,
    repeater_round,
    repeater_threshold_curves,
    swap_survives,
    working_state,
)


@pytest.fixture(scope="module")
def att99():
    return epp_attractor("improved", 0.99)


def test_perfect_operations_close_the_loop():
    r = repeater_round(working_state(1.0, 0.98), 1.0, 0.98)
    assert isinstance(r, RepeaterRoundResult)
    assert r.success and r.f_after_purify >= 0.98 and 0 < r.purify_steps < 50
    assert r.f_after_swap < r.f_before_swap
    assert r.f_after_purify >= r.f_before_swap - 1e-6
    assert r.resources_round >= 3 / r.swap_success_prob


def test_one_percent_noise_closes_at_working_point(att99):
    r = repeater_round(att99.state, 0.99, att99.fidelity - 1e-6, f_max=att99.fidelity)
    assert r.success
    # swap followed by purification returns to the working fidelity
    assert abs(r.f_after_purify - r.f_before_swap) < 1e-3
    assert r.f_after_swap < r.f_after_one_step < r.f_after_purify


def test_target_above_fmax_rejected(att99):
    with pytest.raises(ValueError):
        repeater_round(att99.state, 0.99, att99.fidelity, f_max=att99.fidelity)


@pytest.mark.slow
def test_below_p_min_round_fails():
    f_max = epp_fixed_point("improved", 0.97)
    att = epp_attractor("improved", 0.97)
    r = repeater_round(att.state, 0.97, f_max - 0.01, f_max=f_max)
    assert not r.success and r.state is None
    assert not swap_survives(0.97, att)


def test_swap_survives_above_crossing(att99):
    assert swap_survives(0.99, att99)


def test_resources_monotone_in_noise():
    m = [repeater_resources(p, 0.9) for p in (1.0, 0.995, 0.99)]
    assert m[0] < m[1] < m[2]
    assert all(x >= 4.5 for x in m)


def test_resources_boundaries():
    f_max = epp_fixed_point("improved", 1.0)
    with pytest.raises(ValueError):
        repeater_resources(1.0, 1.0, f_max=f_max)
    m = repeater_resources(1.0, 1 - 2e-6, f_max=f_max)
    assert 4.5 <= m < float("inf")
    with pytest.raises(ValueError):
        repeater_resources(1.0, 0.9, nesting=5)


def test_resources_deterministic():
    assert repeater_resources(1.0, 0.9, nesting=1) == repeater_resources(1.0, 0.9, nesting=1)


def test_non_operational_report():
    with pytest.raises(NonOperationalError):
        repeater_resources(0.95, 0.5)


def test_curve_argument_checks():
    with pytest.raises(ValueError):
        repeater_threshold_curves([0.99], tol=1e-5)
    with pytest.raises(ValueError):
        repeater_threshold_curves([0.9, 0.99])
    with pytest.raises(ValueError):
        repeater_threshold_curves([0.99], criterion="loose")


@pytest.mark.slow
def test_curves_single_point_p1():
    c = repeater_threshold_curves([1.0], tol=1e-3, refine=False)
    assert c.f_max[0] > 1 - 1e-6
    assert c.f_r[0] >= c.f_p[0]
    assert c.p_min == 1.0


@pytest.mark.slow
def test_curves_gap_marker():
    c = repeater_threshold_curves([0.96], refine=False)
    assert c.f_max == [None] and c.f_r == [None] and c.p_min is None
