from types import SimpleNamespace

import numpy as np
import pytest

from uavmec.config import SolverConfig
from uavmec.lp import solve_time_allocation
from uavmec.model import reference_scenario
from uavmec.planner import (
    PlanningError,
    check_feasibility,
    maximize_bits,
    min_completion_time,
    n_lower_bound,
    search_slots,
    straight_trajectory,
)


def test_straight_trajectory_examples(single_gbs):
    assert np.all(straight_trajectory(single_gbs, 5).positions == 0.0)
    sc = reference_scenario([(0, 0)], (0, 0), (1000, 0))
    traj = straight_trajectory(sc, 20)
    assert np.allclose(traj.positions[:, 0], np.arange(0, 1001, 50))
    sc = reference_scenario([(0, 0)], (0, 0), (300, 400))
    assert np.allclose(straight_trajectory(sc, 10).step_lengths(), 50.0)


def test_straight_trajectory_too_short():
    sc = reference_scenario([(0, 0)], (0, 0), (1000, 0))
    with pytest.raises(ValueError):
        straight_trajectory(sc, 19)
    with pytest.raises(ValueError):
        straight_trajectory(sc, 0)


def test_n_lower_bound_examples(single_gbs):
    assert n_lower_bound(reference_scenario([(0, 0)], (0, 0), (1000, 0))) == 20
    five = reference_scenario([(i * 100.0, 0) for i in range(5)], (0, 0), (100, 0),
                              task_bits=5e8)
    assert n_lower_bound(five) == 41
    assert n_lower_bound(single_gbs) == 1


def test_maximize_bits_single_slot(chord_scenario):
    sc = reference_scenario([(0, 0)], (0, 0), (10, 0))
    assert maximize_bits(sc, 1).bits == 0.0


def test_maximize_bits_speed_tight(chord_scenario):
    res = maximize_bits(chord_scenario, 20)
    _, lp_bits = solve_time_allocation(chord_scenario, straight_trajectory(chord_scenario, 20))
    assert res.bits == pytest.approx(lp_bits, rel=1e-12)
    assert np.array_equal(res.trajectory.positions,
                          straight_trajectory(chord_scenario, 20).positions)


def test_maximize_bits_hover_instance(single_gbs):
    res = maximize_bits(single_gbs, 5)
    assert res.bits == pytest.approx(1e7, rel=1e-12)


def test_hover_feasibility_edge(single_gbs):
    ok, plan = check_feasibility(single_gbs.replace(task_bits=1e7), 5)
    assert ok
    assert plan.achieved_bits == pytest.approx(1e7, rel=1e-12)
    assert plan.validate(single_gbs.replace(task_bits=1e7)).feasible
    ok, plan = check_feasibility(single_gbs.replace(task_bits=1e7 + 1), 5)
    assert not ok and plan is None


def test_feasibility_short_circuit(chord_scenario):
    assert check_feasibility(chord_scenario, 19) == (False, None)
    ok, plan = check_feasibility(chord_scenario, 20)
    assert ok and plan.n_slots == 20


def test_zero_task_travel_limited():
    sc = reference_scenario([(300, 700)], (0, 0), (1000, 0))
    plan = min_completion_time(sc)
    assert plan.n_slots == 20 and plan.completion_time == 20.0
    assert np.allclose(plan.trajectory.step_lengths(), 50.0)


def test_on_chord_gbs_travel_limited(chord_scenario):
    plan = min_completion_time(chord_scenario.replace(task_bits=1e6))
    assert plan.n_slots == 20
    assert plan.scheme == "proposed"


def test_hover_instance_min_time(single_gbs):
    sc = single_gbs.replace(task_bits=1e7)
    plan = min_completion_time(sc)
    assert plan.n_slots == 5
    assert plan.validate(sc).feasible
    assert plan.per_gbs_bits.sum() == pytest.approx(1e7, rel=1e-12)


def test_plan_rescaled_to_task():
    sc = reference_scenario([(500, 100)], (0, 0), (1000, 0), task_bits=2e7)
    plan = min_completion_time(sc)
    assert plan.max_bits >= plan.achieved_bits
    assert plan.achieved_bits == pytest.approx(2e7, rel=1e-9)
    report = plan.validate(sc)
    assert report.feasible, report.violations
    assert np.all(np.diff(plan.outer_trace) >= -1e-9 * np.abs(plan.outer_trace[:-1]))
    assert (plan.n_slots - 1, False) in plan.bisection_trace or plan.n_slots == n_lower_bound(sc)


def test_padding_monotonicity():
    sc = reference_scenario([(250, 300), (700, -200)], (0, 0), (1000, 0), task_bits=1.2e8)
    prev = False
    seen = []
    for n in range(26, 35):
        ok, _ = check_feasibility(sc, n)
        assert ok or not prev
        prev = ok
        seen.append(ok)
    assert not seen[0] and seen[-1]


def test_search_slots_bisection():
    calls = []

    def probe(n):
        calls.append(n)
        return (n >= 37, SimpleNamespace(n=n) if n >= 37 else None)

    plan = search_slots(5, probe, SolverConfig())
    assert plan.n == 37
    assert calls[:4] == [5, 10, 20, 40]
    assert 36 in calls and 37 in calls
    assert len(calls) == len(set(calls))


def test_search_slots_cap():
    with pytest.raises(PlanningError):
        search_slots(1, lambda n: (False, None), SolverConfig(max_slots=16))


def test_lower_bound_above_cap(single_gbs):
    with pytest.raises(PlanningError):
        min_completion_time(single_gbs.replace(task_bits=1e7), SolverConfig(max_slots=4))
