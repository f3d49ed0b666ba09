import math

import numpy as np
import pytest

from cpbbus.gates import four_pulse_gate, extract_theta
from cpbbus.scheduler import (
    MAX_TRIPLE_SINE,
    InfeasibleScheduleError,
    ScheduleRequest,
    budget_check,
    fastest_timing,
    feasibility_study,
    max_single_shot_theta,
    minimal_repetitions,
    realize_timeline,
    simulate_schedule,
    solve_schedule,
    triple_sine,
)

W = 2 * math.pi * 100e6
G = 2 * math.pi * 22.79e6


def test_triple_sine_maximum():
    x = np.linspace(0, 2 * math.pi, 801)
    xx, yy = np.meshgrid(x, x)
    assert np.max(triple_sine(xx, yy)) == pytest.approx(MAX_TRIPLE_SINE, abs=1e-5)
    assert triple_sine(4 * math.pi / 3, 2 * math.pi / 3) == pytest.approx(MAX_TRIPLE_SINE)


def test_fastest_timing_hits_target_and_is_minimal():
    for product in (0.05, 0.3, 0.6):
        x, y = fastest_timing(product)
        assert triple_sine(x, y) == pytest.approx(product, abs=1e-12)
        xs = np.linspace(0, 2 * math.pi, 600)
        xx, yy = np.meshgrid(xs, xs)
        ok = triple_sine(xx, yy) >= product
        assert x + y <= np.min((xx + yy)[ok]) + 1e-9


def test_fastest_timing_at_the_peak():
    x, y = fastest_timing(MAX_TRIPLE_SINE)
    assert x == pytest.approx(4 * math.pi / 3, abs=1e-5)
    assert y == pytest.approx(2 * math.pi / 3, abs=1e-5)
    with pytest.raises(InfeasibleScheduleError):
        fastest_timing(0.69)


def test_minimal_repetitions():
    assert minimal_repetitions(0.1, 1.0) == 1
    assert minimal_repetitions(2.0, 1.0) == 4


def test_solve_schedule_single_shot():
    s = solve_schedule(ScheduleRequest(0.1, G, G, W))
    assert s.repetitions == 1
    assert s.achieved_theta == pytest.approx(0.1, abs=1e-10)
    a1, a2 = s.alphas
    assert extract_theta(four_pulse_gate(a1, a2, 20), reference=0.1) == pytest.approx(0.1, abs=1e-10)
    assert s.total_time == pytest.approx(2 * sum(s.durations))


def test_solve_schedule_needs_repetitions_for_pi_over_4():
    s = solve_schedule(ScheduleRequest(math.pi / 4, G, G, W))
    assert s.repetitions == 3
    assert s.total_time == pytest.approx(5.43e-8, rel=2e-3)
    with pytest.raises(InfeasibleScheduleError):
        solve_schedule(ScheduleRequest(math.pi / 4, G, G, W, allow_repetitions=False))
    with pytest.raises(InfeasibleScheduleError):
        solve_schedule(ScheduleRequest(math.pi / 4, G, G, W, max_repetitions=2))


def test_equal_signs_still_reach_positive_theta():
    s = solve_schedule(ScheduleRequest(0.1, G, G, W, signs=(1, 1)))
    assert s.achieved_theta == pytest.approx(0.1, abs=1e-10)


def test_request_validation():
    with pytest.raises(ValueError):
        ScheduleRequest(0.0, G, G, W)
    with pytest.raises(ValueError):
        ScheduleRequest(0.1, -G, G, W)


def test_budget_check():
    s = solve_schedule(ScheduleRequest(0.1, G, G, W))
    ok = budget_check(s, 1e-6, 5e-7)
    assert ok["pass"] and ok["T1"]["margin"] > 1
    bad = budget_check(s, s.total_time, 1.0)
    assert not bad["T1"]["pass"] and not bad["pass"]


def test_max_single_shot_theta():
    assert max_single_shot_theta(G, G, W) == pytest.approx(8 * G * G / W ** 2 * MAX_TRIPLE_SINE)


def test_realized_timeline_and_simulation():
    s = solve_schedule(ScheduleRequest(0.2, G, G, W))
    tl = realize_timeline(s, dead_time=1e-9)
    assert tl.coupled_time == pytest.approx(s.total_time)
    assert tl.wall_clock_time >= s.total_time
    for win in tl.windows:
        k = win.start / (math.pi / W)
        assert k == pytest.approx(round(k), abs=1e-9)
    for method in ("analytic", "propagate"):
        _, rep = simulate_schedule(s, 20, method=method, dead_time=1e-9)
        assert rep.theta == pytest.approx(0.2, abs=1e-7)
        assert rep.process_fidelity > 1 - 1e-7


def test_feasibility_study_flags():
    st = feasibility_study(0.1, 30e-6, 5e-13, 5e9, W)
    assert not st["claimed_product_feasible"]
    assert st["readings_within_factor_3"] == ["cyclic"]
    fp = st["readings"]["cyclic"]["computed"]["four_pulse"]
    assert fp["alternate"]["total_time"] == pytest.approx(2 * fp["confirmed"]["total_time"], rel=0.05)
