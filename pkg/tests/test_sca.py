import math

import numpy as np
import pytest

from conftest import OVERHEAD_RATE
from oracles import grid_midpoint_oracle
from uavmec.config import SolverConfig
from uavmec.model import (
    TimeAllocation,
    Trajectory,
    offload_rate,
    reference_scenario,
    validate_solution,
)
from uavmec.planner import straight_trajectory
from uavmec.sca import (
    SubproblemError,
    expand_at,
    optimize_trajectory,
    rate_lower,
    rate_upper,
    solve_subproblem,
    surrogate_objective,
)


def _overhead_expansion(sc):
    traj = Trajectory(np.vstack([sc.gbs_positions[0], sc.gbs_positions[0]]))
    return expand_at(traj, sc)


def test_expansion_over_gbs(single_gbs):
    ex = _overhead_expansion(single_gbs)
    assert np.allclose(ex.omega[0, 0], 0.0)
    assert ex.q[0, 0] == pytest.approx(2500.0)
    # B rho / (ln2 d^2 (rho + d^2)) with d^2 = 2500 m^2
    assert ex.b[0, 0] == pytest.approx(1e12 / (math.log(2) * 2500 * 1_002_500), rel=1e-12)
    assert ex.b[0, 0] == pytest.approx(575.64, abs=5e-3)
    assert np.all(ex.b > 0)


def test_b_matches_finite_difference():
    sc = reference_scenario([(0.0, 0.0), (300.0, -100.0)], (0.0, 0.0), (0.0, 0.0))
    rng = np.random.default_rng(3)
    B, rho = sc.bandwidth, sc.snr_ref
    h = 1e-3
    for u in rng.uniform(-400, 400, size=(50, 2)):
        ex = expand_at(Trajectory(np.vstack([u, u])), sc)
        for k in range(sc.n_gbs):
            d2 = ex.dist_sq_at_local[0, k]
            fd = -(B * math.log2(1 + rho / (d2 + h)) - B * math.log2(1 + rho / (d2 - h))) / (2 * h)
            assert ex.b[0, k] == pytest.approx(fd, rel=1e-4)


def test_taylor_equality_at_offset_point(single_gbs):
    u = np.array([100.0, 0.0])
    ex = expand_at(Trajectory(np.vstack([u, u])), single_gbs)
    assert ex.q[0, 0] + 2 * ex.omega[0, 0] @ u == pytest.approx(12500.0)
    for bound in (rate_upper, rate_lower):
        assert bound(u, 0, 0, ex, single_gbs) == pytest.approx(
            offload_rate(u, 0, single_gbs), rel=1e-9)


def test_rate_upper_constant_at_overhead_expansion(single_gbs):
    ex = _overhead_expansion(single_gbs)
    for u in [(0, 0), (100, 0), (-300, 250)]:
        assert rate_upper(u, 0, 0, ex, single_gbs) == pytest.approx(OVERHEAD_RATE, rel=1e-12)
        assert rate_upper(u, 0, 0, ex, single_gbs) >= offload_rate(u, 0, single_gbs)


def test_rate_lower_example(single_gbs):
    ex = _overhead_expansion(single_gbs)
    low = rate_lower((100.0, 0.0), 0, 0, ex, single_gbs)
    assert low == pytest.approx(OVERHEAD_RATE - ex.b[0, 0] * 1e4, rel=1e-12)
    assert low == pytest.approx(2.8911e6, rel=1e-4)
    assert offload_rate((100.0, 0.0), 0, single_gbs) == pytest.approx(6.3399e6, rel=1e-4)
    assert rate_lower((3000.0, 0.0), 0, 0, ex, single_gbs) < 0


def test_rate_upper_domain_error(single_gbs):
    u = np.array([100.0, 0.0])
    ex = expand_at(Trajectory(np.vstack([u, u])), single_gbs)
    # the linearized distance 12500 + 200 (x - 100) is negative for x < 37.5
    with pytest.raises(ValueError):
        rate_upper((-100.0, 0.0), 0, 0, ex, single_gbs)


def test_sandwich_random_pairs():
    sc = reference_scenario([(200, 600), (350, 350), (500, 500), (750, 650), (850, 550)],
                            (0, 500), (1000, 500))
    rng = np.random.default_rng(11)
    n = 10_000
    local = rng.uniform(0, 1000, size=(n, 2))
    ang = rng.uniform(0, 2 * np.pi, n)
    rad = 500 * np.sqrt(rng.uniform(0, 1, n))
    pts = local + rad[:, None] * np.c_[np.cos(ang), np.sin(ang)]
    ex = expand_at(Trajectory(local), sc)
    worst_up = worst_low = 0.0
    for i in range(n):
        k = i % sc.n_gbs
        r = offload_rate(pts[i], k, sc)
        low = rate_lower(pts[i], k, i, ex, sc)
        worst_low = max(worst_low, (low - r) / r)
        ell = ex.q[i, k] + 2 * ex.omega[i, k] @ pts[i]
        if ell > 0:
            worst_up = max(worst_up, (r - rate_upper(pts[i], k, i, ex, sc)) / r)
        r0 = offload_rate(local[i], k, sc)
        assert rate_lower(local[i], k, i, ex, sc) == pytest.approx(r0, rel=1e-9)
        assert rate_upper(local[i], k, i, ex, sc) == pytest.approx(r0, rel=1e-9)
    assert worst_low <= 1e-9
    assert worst_up <= 1e-9


# trajectory subproblem ----------------------------------------------------


def _generous(gbs, u0, u1):
    return reference_scenario([gbs], u0, u1, cpu_freq=1e15)


def _all_on_gbs(N):
    tau = np.zeros((N, 1))
    tau[:N - 1] = 1.0
    return TimeAllocation(tau)


def test_zero_allocation_keeps_local_point(chord_scenario):
    traj = straight_trajectory(chord_scenario, 25)
    out = solve_subproblem(chord_scenario, TimeAllocation.zeros(25, 1),
                           expand_at(traj, chord_scenario))
    assert np.array_equal(out.positions, traj.positions)
    out, diag = optimize_trajectory(chord_scenario, TimeAllocation.zeros(25, 1), traj)
    assert np.array_equal(out.positions, traj.positions)
    assert diag.iterations == 1


def test_speed_tight_singleton(chord_scenario):
    traj = straight_trajectory(chord_scenario, 20)
    alloc = _all_on_gbs(20)
    out = solve_subproblem(chord_scenario, alloc, expand_at(traj, chord_scenario))
    assert np.array_equal(out.positions, traj.positions)
    out, diag = optimize_trajectory(chord_scenario, alloc, traj)
    assert np.array_equal(out.positions, traj.positions)
    assert diag.iterations == 1


def test_allocation_shape_checked(chord_scenario):
    traj = straight_trajectory(chord_scenario, 25)
    with pytest.raises(ValueError):
        solve_subproblem(chord_scenario, TimeAllocation.zeros(24, 1),
                         expand_at(traj, chord_scenario))


def test_subproblem_error_carries_iterate():
    err = SubproblemError("stalled", np.ones(3))
    assert "stalled" in str(err) and err.iterate.shape == (3,)


def test_interior_slots_move_closer():
    nu = np.array([400.0, 300.0])
    sc = _generous(nu, (0.0, 0.0), (800.0, 0.0))
    N = 20
    init = straight_trajectory(sc, N)
    alloc = _all_on_gbs(N)
    out, diag = optimize_trajectory(sc, alloc, init)
    before = np.linalg.norm(init.positions[1:N] - nu, axis=1)
    after = np.linalg.norm(out.positions[1:N] - nu, axis=1)
    assert np.all(after < before)
    obj = np.array(diag.objective)
    assert np.all(np.diff(obj) > 0)
    assert validate_solution(out, alloc, sc).feasible


def _midpoint_instance():
    nu = np.array([40.0, 60.0])
    sc = _generous(nu, (0.0, 0.0), (80.0, 0.0))
    init = straight_trajectory(sc, 2)
    return sc, _all_on_gbs(2), init


def test_subproblem_matches_grid_oracle():
    sc, alloc, init = _midpoint_instance()
    ex = expand_at(init, sc)
    out = solve_subproblem(sc, alloc, ex)
    got = surrogate_objective(out.positions, alloc, ex, sc)

    def surrogate(p):
        return surrogate_objective(np.vstack([sc.u_init, p, sc.u_final]), alloc, ex, sc)

    best, _ = grid_midpoint_oracle(sc, alloc.tau, surrogate, spacing=1.0)
    assert got >= best * (1 - 1e-3)
    assert got == pytest.approx(best, rel=1e-3)


def test_sca_matches_grid_oracle():
    sc, alloc, init = _midpoint_instance()
    out, diag = optimize_trajectory(sc, alloc, init)
    best, where = grid_midpoint_oracle(sc, alloc.tau, lambda p: offload_rate(p, 0, sc), 1.0)
    assert diag.objective[-1] == pytest.approx(best, rel=1e-2)
    assert np.all(np.diff(diag.objective) > 0)
    assert np.linalg.norm(out.positions[1] - where) < 2.0


def test_capacity_limited_trajectory_stays_feasible():
    sc = reference_scenario([(300.0, 200.0), (700.0, -150.0)], (0.0, 0.0), (1000.0, 0.0))
    N = 26
    init = straight_trajectory(sc, N)
    from uavmec.lp import solve_time_allocation

    alloc, bits = solve_time_allocation(sc, init)
    out, diag = optimize_trajectory(sc, alloc, init, SolverConfig(sca_max_iters=10))
    obj = np.array(diag.objective)
    assert obj[0] == pytest.approx(bits, rel=1e-9)
    assert np.all(np.diff(obj) >= -1e-9 * obj[:-1])
    assert validate_solution(out, alloc, sc.replace(task_bits=0.0)).feasible
    assert np.array_equal(out.positions[0], sc.u_init)
    assert np.array_equal(out.positions[-1], sc.u_final)
    assert diag.reason in ("converged", "max-iters")
