import numpy as np
import pytest

from uavmec.lp import (
    EQ,
    GE,
    LE,
    LinearProgram,
    LpError,
    lp_solve,
    solve_time_allocation,
)
from uavmec.config import SolverConfig
from uavmec.model import Trajectory, rate_matrix, reference_scenario, validate_solution

from conftest import OVERHEAD_RATE
from oracles import allocation_oracle_bits, vertex_enumeration_max


def test_one_variable_box():
    sol = lp_solve(LinearProgram([1.0], [[1.0]], [LE], [1.0]))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0)
    assert sol.objective == pytest.approx(1.0)


def test_degenerate_face():
    sol = lp_solve(LinearProgram([1.0, 1.0], [[1.0, 1.0]], [LE], [1.0]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)


def test_infeasible_and_unbounded():
    infeasible = LinearProgram([1.0], [[1.0], [1.0]], [LE, GE], [1.0, 2.0])
    assert lp_solve(infeasible).status == "infeasible"
    unbounded = LinearProgram([1.0, 0.0], [[0.0, 1.0]], [LE], [1.0])
    assert lp_solve(unbounded).status == "unbounded"


def test_equality_and_lower_bounds():
    # max x + 2y, x + y = 3, x >= 1, y >= 0.5, y <= 1.5
    lp = LinearProgram([1.0, 2.0], [[1.0, 1.0], [0.0, 1.0]], [EQ, LE], [3.0, 1.5],
                       lower=[1.0, 0.5])
    sol = lp_solve(lp)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [1.5, 1.5])
    assert sol.objective == pytest.approx(4.5)


def test_negative_rhs_ge_row():
    # max -x s.t. -x <= -2 (i.e. x >= 2)
    sol = lp_solve(LinearProgram([-1.0], [[-1.0]], [LE], [-2.0]))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(2.0)


def test_redundant_equalities():
    lp = LinearProgram([1.0, 1.0], [[1.0, 1.0], [2.0, 2.0], [1.0, 0.0]], [EQ, EQ, LE],
                       [1.0, 2.0, 0.25])
    sol = lp_solve(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.0)


def test_pivot_cap_reported():
    rng = np.random.default_rng(3)
    A = rng.uniform(0.1, 1.0, size=(8, 8))
    lp = LinearProgram(rng.uniform(0.5, 1, 8), A, [LE] * 8, np.ones(8))
    with pytest.raises(LpError):
        lp_solve(lp, SolverConfig(lp_max_pivots=1))


def test_rejects_malformed():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], ["<"], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[np.nan]], [LE], [1.0])
    with pytest.raises(ValueError):
        LinearProgram([1.0, 1.0], [[1.0, 1.0]], [LE, LE], [1.0])


def test_beale_cycling_example():
    # classic degenerate instance that cycles under the textbook largest-coefficient rule
    c = [0.75, -150.0, 0.02, -6.0]
    A = [[0.25, -60.0, -0.04, 9.0],
         [0.5, -90.0, -0.02, 3.0],
         [0.0, 0.0, 1.0, 0.0]]
    sol = lp_solve(LinearProgram(c, A, [LE] * 3, [0.0, 0.0, 1.0]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.05)


@pytest.mark.parametrize("seed", range(25))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    m, n = 5, 8
    A = rng.uniform(0.0, 1.0, size=(m, n))
    A[:, rng.permutation(n)[:2]] += 0.5  # every column bounded through some row
    A = np.where(A.sum(axis=0) > 0, A, 1.0)
    b = rng.uniform(0.5, 2.0, size=m)
    c = rng.normal(size=n)
    sol = lp_solve(LinearProgram(c, A, [LE] * m, b))
    G = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    expected = vertex_enumeration_max(c, G, h)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(expected, rel=1e-8, abs=1e-12)
    assert np.all(A @ sol.x <= b + 1e-8 * np.abs(b).max())
    assert np.all(sol.x >= -1e-12)


def _hover(n):
    return Trajectory(np.zeros((n + 1, 2)))


def test_single_slot_carries_nothing(single_gbs):
    alloc, bits = solve_time_allocation(single_gbs, _hover(1))
    assert bits == 0.0
    assert np.all(alloc.tau == 0.0)
    sc = reference_scenario([(0, 0), (100, 0)], (0, 0), (10, 0))
    assert solve_time_allocation(sc, Trajectory([[0, 0], [10, 0]]))[1] == 0.0


def test_two_slots_capacity_limited(single_gbs):
    alloc, bits = solve_time_allocation(single_gbs, _hover(2))
    assert bits == pytest.approx(min(OVERHEAD_RATE, 2.5e6), rel=1e-12)
    assert bits == pytest.approx(2.5e6, rel=1e-12)
    # grid search over the only useful variable tau_1[1]
    taus = np.linspace(0, 1, 100001)
    feasible = taus * OVERHEAD_RATE * 1e3 <= 2.5e9 * (1 + 1e-12)
    assert bits == pytest.approx((taus[feasible] * OVERHEAD_RATE).max(), rel=1e-4)
    assert alloc.tau[-1, 0] == 0.0


def test_three_slots_capacity_limited(single_gbs):
    alloc, bits = solve_time_allocation(single_gbs, _hover(3))
    assert bits == pytest.approx(5e6, rel=1e-12)
    report = validate_solution(_hover(3), alloc, single_gbs.replace(task_bits=bits))
    assert report.feasible, report.violations


def test_rate_limited_when_compute_is_plentiful():
    sc = reference_scenario([(0, 0)], (0, 0), (0, 0), cpu_freq=1e18)
    _, bits = solve_time_allocation(sc, _hover(4))
    assert bits == pytest.approx(3 * OVERHEAD_RATE, rel=1e-12)


def _random_traj(rng, sc, n):
    steps = rng.normal(size=(n, 2))
    steps *= (rng.uniform(0, sc.s_max, size=n) / np.linalg.norm(steps, axis=1))[:, None]
    pos = np.vstack([sc.u_init, sc.u_init + np.cumsum(steps, axis=0)])
    return Trajectory(pos)


@pytest.mark.parametrize("seed", range(10))
def test_allocation_bounds_and_validation(seed):
    rng = np.random.default_rng(100 + seed)
    K = int(rng.integers(1, 4))
    N = int(rng.integers(2, 12))
    sc = reference_scenario(rng.uniform(-300, 300, size=(K, 2)), (0, 0), (0, 0),
                            cpu_freq=rng.uniform(0.5e9, 5e9, size=K))
    traj = _random_traj(rng, sc, N)
    sc = sc.replace(u_final=traj.positions[-1])
    alloc, bits = solve_time_allocation(sc, traj)
    report = validate_solution(traj, alloc, sc.replace(task_bits=bits))
    assert report.feasible, report.violations
    aggregate = (N - 1) * sc.slot_capacity_bits.sum()
    tdma = sc.slot_len * rate_matrix(traj.positions[1:], sc).max(axis=1).sum()
    assert bits <= aggregate * (1 + 1e-9)
    assert bits <= tdma * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_padding_with_terminal_hover_never_hurts(seed):
    rng = np.random.default_rng(200 + seed)
    K = int(rng.integers(1, 4))
    sc = reference_scenario(rng.uniform(-200, 200, size=(K, 2)), (0, 0), (0, 0))
    traj = _random_traj(rng, sc, int(rng.integers(2, 8)))
    prev = -1.0
    pos = traj.positions
    for _ in range(4):
        _, bits = solve_time_allocation(sc, Trajectory(pos))
        assert bits >= prev - 1e-9 * max(1.0, prev)
        prev = bits
        pos = np.vstack([pos, pos[-1:]])


@pytest.mark.parametrize("seed", range(10))
def test_allocation_matches_vertex_oracle(seed):
    rng = np.random.default_rng(300 + seed)
    K = int(rng.integers(1, 3))
    N = int(rng.integers(2, 4))
    sc = reference_scenario(rng.uniform(-150, 150, size=(K, 2)), (0, 0), (0, 0),
                            cpu_freq=rng.uniform(1e9, 8e9, size=K))
    traj = _random_traj(rng, sc, N)
    _, bits = solve_time_allocation(sc, traj)
    assert bits == pytest.approx(allocation_oracle_bits(sc, traj), rel=1e-6)
