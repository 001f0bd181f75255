"""Benchmark schemes: straight flight and successive hover-and-fly."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .lp import LE, EQ, LinearProgram, LpError, lp_solve, solve_time_allocation
from .model import BITS_SCALE, Scenario, Trajectory, rate_matrix
from .planner import (
    BitsResult,
    MissionPlan,
    ceil_tol,
    make_plan,
    meets_target,
    n_lower_bound,
    search_slots,
    straight_trajectory,
)

log = logging.getLogger(__name__)

MAX_EXACT_TSP = 20


@dataclass(frozen=True)
class VisitOrder:
    order: tuple[int, ...]  # 0-based GBS indices
    length: float  # start -> GBSs in order -> end, metres


def _path_length(scenario: Scenario, order) -> float:
    pts = np.vstack([scenario.u_init, scenario.gbs_positions[list(order)], scenario.u_final])
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def tsp_visit_order(scenario: Scenario) -> VisitOrder:
    """Shortest open tour start -> every GBS -> end (Held-Karp).

    Among equally short tours the lexicographically smallest order is returned.
    """
    K = scenario.n_gbs
    if K > MAX_EXACT_TSP:
        raise ValueError(f"exact TSP limited to {MAX_EXACT_TSP} GBSs, got {K}")
    nu = scenario.gbs_positions
    D = np.linalg.norm(nu[:, None, :] - nu[None, :, :], axis=2)
    start = np.linalg.norm(nu - scenario.u_init, axis=1)
    end = np.linalg.norm(nu - scenario.u_final, axis=1)

    # g[mask, i]: shortest path from GBS i through every GBS in mask, then to the end
    full = (1 << K) - 1
    g = np.full((1 << K, K), np.inf)
    for i in range(K):
        g[1 << i, i] = end[i]
    for mask in range(1, full + 1):
        members = [i for i in range(K) if mask >> i & 1]
        if len(members) < 2:
            continue
        for i in members:
            rest = mask ^ (1 << i)
            g[mask, i] = np.min(D[i] + g[rest])

    tol = 1e-9 * max(1.0, float(start.max() + end.max() + D.max()) * K)
    totals = start + g[full]
    i = int(np.nonzero(totals <= totals.min() + tol)[0][0])
    order = [i]
    mask = full
    while mask != (1 << i):
        rest = mask ^ (1 << i)
        cand = D[i] + g[rest]
        j = int(np.nonzero(cand <= g[mask, i] + tol)[0][0])
        order.append(j)
        mask, i = rest, j
    return VisitOrder(tuple(order), _path_length(scenario, order))


def _straight_probe(scenario: Scenario, config: SolverConfig):
    def probe(n: int):
        traj = straight_trajectory(scenario, n)
        alloc, bits = solve_time_allocation(scenario, traj, config)
        if not meets_target(bits, scenario, config):
            return False, None
        return True, make_plan(scenario, BitsResult(traj, alloc, bits, [bits], []), "straight")
    return probe


def solve_straight_flight(scenario: Scenario, config: SolverConfig | None = None) -> MissionPlan:
    """Minimum-time plan with the UAV flying the chord at constant speed."""
    config = config or SolverConfig()
    return search_slots(n_lower_bound(scenario), _straight_probe(scenario, config), config)


@dataclass(frozen=True)
class _FlightPlan:
    """Max-speed samples along the visiting path, hover blocks not yet inserted."""

    positions: np.ndarray  # (N_fly, 2), flight slot f = 1..N_fly
    arrival: np.ndarray  # (K,), flight slots flown before hovering at the b-th waypoint
    waypoints: np.ndarray  # (K, 2), GBS positions in visiting order
    order: tuple[int, ...]

    @property
    def n_fly(self) -> int:
        return self.positions.shape[0]


def _flight_plan(scenario: Scenario, order: tuple[int, ...]) -> _FlightPlan:
    S = scenario.s_max
    way = np.vstack([scenario.u_init, scenario.gbs_positions[list(order)], scenario.u_final])
    samples = []
    arrival = []
    for leg in range(way.shape[0] - 1):
        a, b = way[leg], way[leg + 1]
        length = float(np.linalg.norm(b - a))
        steps = ceil_tol(length / S) if length > 0 else 0
        if steps:
            direction = (b - a) / length
            dist = np.minimum(np.arange(1, steps + 1) * S, length)
            pts = a + dist[:, None] * direction
            pts[-1] = b
            samples.append(pts)
        if leg < way.shape[0] - 2:
            arrival.append(sum(p.shape[0] for p in samples))
    positions = np.vstack(samples) if samples else np.zeros((0, 2))
    return _FlightPlan(positions, np.array(arrival, dtype=int), way[1:-1], order)


def hover_fly_trajectory(scenario: Scenario, flight: _FlightPlan, hovers) -> Trajectory:
    """Insert ``hovers[b]`` slots above the b-th visited GBS into the flight."""
    pts = [scenario.u_init[None, :]]
    prev = 0
    for b, h in enumerate(hovers):
        cut = flight.arrival[b]
        pts.append(flight.positions[prev:cut])
        pts.append(np.repeat(flight.waypoints[b][None, :], int(h), axis=0))
        prev = cut
    pts.append(flight.positions[prev:])
    pos = np.vstack(pts)
    if pos.shape[0] == 1:
        pos = np.vstack([pos, pos])
    pos[-1] = scenario.u_final
    return Trajectory(pos)


def _relaxed_hover_lp(scenario: Scenario, flight: _FlightPlan, n_slots: int) -> np.ndarray:
    """Real-valued hover slot counts maximizing offloaded bits for ``n_slots``.

    Each hover block is one aggregated column per GBS; capacity constraints
    are imposed at every flight slot and at the start of every block.
    """
    K = scenario.n_gbs
    F = flight.n_fly
    H = n_slots - F
    cap = scenario.slot_capacity_bits / BITS_SCALE
    dt = scenario.slot_len
    r_fly = rate_matrix(flight.positions, scenario) / BITS_SCALE  # (F, K)
    r_hov = rate_matrix(flight.waypoints, scenario) / BITS_SCALE  # (K blocks, K gbs)
    nf, nb = F * K, K * K
    nv = nf + nb + K

    def fly(f, k):  # f is 1-based
        return (f - 1) * K + k

    def hov(b, k):
        return nf + b * K + k

    def hcount(b):
        return nf + nb + b

    rows, rhs, senses = [], [], []
    for f in range(1, F + 1):
        row = np.zeros(nv)
        row[[fly(f, k) for k in range(K)]] = 1.0
        rows.append(row); rhs.append(dt); senses.append(LE)
    for b in range(K):
        row = np.zeros(nv)
        row[[hov(b, k) for k in range(K)]] = 1.0
        row[hcount(b)] = -dt
        rows.append(row); rhs.append(0.0); senses.append(LE)
    row = np.zeros(nv)
    row[nf + nb:] = 1.0
    rows.append(row); rhs.append(float(H)); senses.append(EQ)

    arrival = flight.arrival
    for k in range(K):
        # suffix starting at flight slot f
        for f in range(1, F + 1):
            row = np.zeros(nv)
            for f2 in range(f, F + 1):
                row[fly(f2, k)] = r_fly[f2 - 1, k]
            for b in range(K):
                if arrival[b] >= f:
                    row[hov(b, k)] = r_hov[b, k]
                else:
                    row[hcount(b)] = cap[k]
            rows.append(row); rhs.append((n_slots - f) * cap[k]); senses.append(LE)
        # suffix starting at the first slot of block b
        for b in range(K):
            row = np.zeros(nv)
            for f2 in range(arrival[b] + 1, F + 1):
                row[fly(f2, k)] = r_fly[f2 - 1, k]
            for b2 in range(K):
                if b2 >= b:
                    row[hov(b2, k)] = r_hov[b2, k]
                else:
                    row[hcount(b2)] = cap[k]
            rows.append(row); rhs.append((n_slots - arrival[b] - 1) * cap[k]); senses.append(LE)

    c = np.zeros(nv)
    for f in range(1, F + 1):
        for k in range(K):
            c[fly(f, k)] = r_fly[f - 1, k]
    for b in range(K):
        for k in range(K):
            c[hov(b, k)] = r_hov[b, k]
    sol = lp_solve(LinearProgram(c, np.array(rows), senses, np.array(rhs)))
    if sol.status != "optimal":
        raise LpError(f"relaxed hover LP returned status {sol.status!r}")
    return np.clip(sol.x[nf + nb:], 0.0, None)


def _hover_allocation(scenario: Scenario, flight: _FlightPlan, n_slots: int,
                      config: SolverConfig) -> BitsResult:
    K = scenario.n_gbs
    H = n_slots - flight.n_fly

    def evaluate(hovers):
        traj = hover_fly_trajectory(scenario, flight, hovers)
        alloc, bits = solve_time_allocation(scenario, traj, config)
        return BitsResult(traj, alloc, bits, [bits], [])

    if H == 0:
        return evaluate(np.zeros(K, dtype=int))
    relaxed = _relaxed_hover_lp(scenario, flight, n_slots)
    hovers = np.floor(relaxed + 1e-9).astype(int)
    while hovers.sum() > H:  # float noise
        hovers[int(np.argmax(hovers))] -= 1
    best = None
    for _ in range(H - int(hovers.sum())):
        best = None
        for b in range(K):
            trial = hovers.copy()
            trial[b] += 1
            result = evaluate(trial)
            if best is None or result.bits > best[1].bits:
                best = (trial, result)
        hovers = best[0]
    if best is None:
        return evaluate(hovers)
    return best[1]


def solve_hover_and_fly(scenario: Scenario, config: SolverConfig | None = None) -> MissionPlan:
    """Minimum-time plan that visits every GBS along the TSP path and hovers there."""
    config = config or SolverConfig()
    order = tsp_visit_order(scenario)
    flight = _flight_plan(scenario, order.order)
    lower = max(n_lower_bound(scenario), flight.n_fly, 1)

    def probe(n: int):
        result = _hover_allocation(scenario, flight, n, config)
        if not meets_target(result.bits, scenario, config):
            return False, None
        return True, make_plan(scenario, result, "hover-fly")

    return search_slots(lower, probe, config)


def hover_fly_start(scenario: Scenario, n_slots: int,
                    config: SolverConfig | None = None) -> Trajectory | None:
    """The hover-and-fly trajectory for ``n_slots``, or None if the tour does not fit."""
    config = config or SolverConfig()
    if scenario.n_gbs > MAX_EXACT_TSP:
        return None
    flight = _flight_plan(scenario, tsp_visit_order(scenario).order)
    if n_slots < max(flight.n_fly, 1):
        return None
    return _hover_allocation(scenario, flight, n_slots, config).trajectory
