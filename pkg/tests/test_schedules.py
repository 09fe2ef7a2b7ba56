import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdcp.schedules import (
    ScheduleConfig,
    ScheduleKind,
    ScheduleState,
    init_from_first_update,
    maybe_reinitialize,
    nearest_rank_percentile,
    next_step,
)

G1 = np.array([3.0, -4.0])


def cond(**kw):
    return ScheduleConfig(kind=ScheduleKind.CONDITIONAL, **kw)


def run(cfg, state, ratios):
    return [next_step(state, cfg, m)[0] for m in ratios]


def test_initial_step_reciprocal():
    s = init_from_first_update(ScheduleConfig(kind="reciprocal"), G1, 98.0, 2)
    assert s.a_init == pytest.approx(9.8, abs=1e-12)


def test_initial_step_conditional():
    s = init_from_first_update(cond(), G1, 98.0, 2)
    assert s.a_init == pytest.approx(14.0, abs=1e-12)
    assert s.b == pytest.approx(1.4, abs=1e-12)


@pytest.mark.parametrize("kind", list(ScheduleKind))
def test_zero_first_update_falls_back_to_one(kind):
    s = init_from_first_update(ScheduleConfig(kind=kind), np.zeros(2), 98.0, 2)
    assert s.a_init == 1.0


def test_reciprocal_sequence():
    cfg = ScheduleConfig(kind="reciprocal")
    state = init_from_first_update(cfg, G1, 98.0, 2)
    a = run(cfg, state, [0.5] * 3)
    assert a == [9.8, 9.8 / 2, 9.8 / 3]


def test_moderate_recursion():
    cfg = ScheduleConfig(kind="moderate", M=10, k_bs=2, nu=0.01)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    a = run(cfg, state, [0.5] * 4)
    expected = [9.8]
    for k in range(2, 5):
        expected.append(expected[-1] * (1 - 1 / (1 + 10 + k)) ** 0.51)
    np.testing.assert_allclose(a, expected, rtol=1e-15)


def test_conditional_bootstrap_is_constant():
    cfg = cond(k_bs=36, M=360)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    a = run(cfg, state, np.linspace(0.9, 0.1, 36))
    assert a == [14.0] * 36


def test_conditional_adaptive_reaches_floor_at_last_step():
    cfg = cond(k_bs=36, M=360)
    state = ScheduleState(a_current=10.0, k=360, a_init=14.0, b=1.4,
                          miss_ratio_history=[0.1], _sorted_history=[0.1])
    a, _ = next_step(state, cfg, 0.5)
    assert a == pytest.approx(1.4, abs=1e-12)


def test_conditional_adaptive_halving_stops_at_floor():
    # M - k + 1 = 6 gives a_tilde = 2.0 - 0.6/6 = 1.9
    cfg = cond(k_bs=36, M=360)
    state = ScheduleState(a_current=2.0, k=355, a_init=14.0, b=1.4,
                          miss_ratio_history=[0.5], _sorted_history=[0.5])
    a, _ = next_step(state, cfg, 0.2)
    assert a == pytest.approx(1.4, abs=1e-12)


def test_conditional_adaptive_halves_when_low():
    cfg = cond(k_bs=2, M=100)
    state = ScheduleState(a_current=10.0, k=50, a_init=14.0, b=1.0,
                          miss_ratio_history=[0.5], _sorted_history=[0.5])
    a, _ = next_step(state, cfg, 0.1)
    assert a == 5.0


def test_conditional_moderate_tail():
    cfg = cond(k_bs=2, M=5, nu=0.01)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    a = run(cfg, state, [0.5] * 8)
    for k in range(6, 9):
        assert a[k - 1] == pytest.approx(a[k - 2] * (1 - 1 / (1 + k)) ** 0.51,
                                         rel=1e-15)


def test_history_and_counter_advance():
    cfg = cond()
    state = init_from_first_update(cfg, G1, 98.0, 2)
    run(cfg, state, [0.3, 0.2, 0.4])
    assert state.k == 4
    assert state.miss_ratio_history == [0.3, 0.2, 0.4]


@pytest.mark.parametrize("m", [-0.1, 1.1, math.nan])
def test_miss_ratio_out_of_range(m):
    cfg = cond()
    state = init_from_first_update(cfg, G1, 98.0, 2)
    with pytest.raises(ValueError):
        next_step(state, cfg, m)


def test_nearest_rank_percentile():
    data = sorted(range(1, 101))
    assert nearest_rank_percentile(data, 5) == 5
    assert nearest_rank_percentile([7.0], 5) == 7.0
    assert nearest_rank_percentile(list(range(1, 21)), 5) == 1
    assert nearest_rank_percentile(list(range(1, 22)), 5) == 2


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=400, max_size=400),
       st.integers(1, 50), st.integers(1, 300))
def test_conditional_never_below_floor_and_nonincreasing(ratios, k_bs, extra):
    cfg = cond(k_bs=k_bs, M=k_bs + extra)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    a = np.array(run(cfg, state, ratios))
    adaptive = a[k_bs:cfg.M]
    assert np.all(adaptive >= state.b - 1e-12)
    assert np.all(np.diff(a) <= 1e-12)


def test_conditional_tail_decays_like_power_law():
    # k^-(1/2 + nu): not summable, square-summable
    cfg = cond(k_bs=36, M=360)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    n = 200_000
    a = np.array(run(cfg, state, np.random.default_rng(0).random(n)))
    k = np.arange(cfg.M + 1, n + 1)
    ratio = a[cfg.M:] * k ** 0.51
    assert ratio.max() / ratio.min() < 1.01


def test_reinitialize_at_boundary():
    cfg = cond(reinit_period=3 * 3600.0)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    run(cfg, state, [0.5] * 5)
    fresh = maybe_reinitialize(state, cfg, 10800.0, np.array([1.0, -1.0]), 98.0, 2)
    assert fresh is not state
    assert fresh.k == 1 and fresh.init_time == 10800.0
    assert fresh.a_init == pytest.approx(49.0)
    assert fresh.miss_ratio_history == []
    again = maybe_reinitialize(fresh, cfg, 10810.0, G1, 98.0, 2)
    assert again is fresh


def test_no_reinitialize_before_boundary():
    cfg = cond(reinit_period=86400.0)
    state = init_from_first_update(cfg, G1, 98.0, 2)
    assert maybe_reinitialize(state, cfg, 10800.0, G1, 98.0, 2) is state


def test_no_reinitialize_without_period():
    cfg = cond()
    state = init_from_first_update(cfg, G1, 98.0, 2)
    assert maybe_reinitialize(state, cfg, 1e9, G1, 98.0, 2) is state


@pytest.mark.parametrize("kw", [
    dict(k_bs=0), dict(k_bs=10, M=10), dict(nu=0.0), dict(b_ratio=1.0),
    dict(reinit_period=0.0),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        cond(**kw)


def test_for_slot_length_phase_counts():
    assert (ScheduleConfig.for_slot_length(10).k_bs, ScheduleConfig.for_slot_length(10).M) == (36, 360)
    c = ScheduleConfig.for_slot_length(100)
    assert (c.k_bs, c.M) == (3, 36)
    c = ScheduleConfig.for_slot_length(1)
    assert (c.k_bs, c.M) == (360, 3600)
