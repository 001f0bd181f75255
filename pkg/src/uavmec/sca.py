"""Trajectory update under a fixed time allocation by successive convex approximation.

Each iteration linearizes the link budget around the current trajectory:

* the squared distance is bounded below by its tangent plane, which gives a
  convex *upper* bound on the rate; it replaces the rate in the GBS
  computation-capacity constraints (so the restricted set is safe);
* the rate is convex in the squared distance, so its tangent gives a concave
  *lower* bound; it replaces the rate in the objective.

The resulting convex problem is solved with a small primal log-barrier Newton
method over the free waypoints ``u[1..N-1]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import SolverConfig
from .model import (
    BITS_SCALE,
    Scenario,
    TimeAllocation,
    Trajectory,
    capacity_slack,
    distance_sq_matrix,
    rate_matrix,
)

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
# objective weight on the elastic slack added to the capacity constraints
ELASTIC_PENALTY = 1e4
ELASTIC_MARGIN = 1e-6


class SubproblemError(RuntimeError):
    def __init__(self, message: str, iterate: np.ndarray | None = None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True, eq=False)
class TaylorExpansion:
    """Linearization data indexed by ``[position n, GBS k]`` for ``n = 0..N``."""

    local: np.ndarray
    omega: np.ndarray  # (N+1, K, 2) = u_local[n] - nu_k
    q: np.ndarray  # (N+1, K)
    b: np.ndarray  # (N+1, K), bit/s per m^2
    rate_at_local: np.ndarray  # (N+1, K)
    dist_sq_at_local: np.ndarray  # (N+1, K)

    @property
    def n_slots(self) -> int:
        return self.local.shape[0] - 1


def expand_at(local: Trajectory, scenario: Scenario) -> TaylorExpansion:
    pos = local.positions
    omega = pos[:, None, :] - scenario.gbs_positions[None, :, :]
    d2 = distance_sq_matrix(pos, scenario)
    q = d2 - 2.0 * np.einsum("nkd,nd->nk", omega, pos)
    rho = scenario.snr_ref
    b = scenario.bandwidth * rho / (LN2 * d2 * (rho + d2))
    rate = rate_matrix(pos, scenario)
    return TaylorExpansion(pos, omega, q, b, rate, d2)


def _linear_dist(u, k: int, n: int, expansion: TaylorExpansion) -> float:
    return float(expansion.q[n, k] + 2.0 * expansion.omega[n, k] @ np.asarray(u, dtype=float))


def rate_upper(u, k: int, n: int, expansion: TaylorExpansion, scenario: Scenario) -> float:
    """Convex over-estimate of the rate at ``u`` built at position ``n``."""
    ell = _linear_dist(u, k, n, expansion)
    if ell <= 0:
        raise ValueError(
            f"linearized squared distance {ell:.6g} is not positive at u={u} (k={k}, n={n})")
    return scenario.bandwidth * math.log2(1.0 + scenario.snr_ref / ell)


def rate_lower(u, k: int, n: int, expansion: TaylorExpansion, scenario: Scenario) -> float:
    """Concave under-estimate of the rate at ``u``; may go negative far from the GBS."""
    diff = np.asarray(u, dtype=float) - scenario.gbs_positions[k]
    d2 = diff @ diff + scenario.altitude**2
    return float(expansion.rate_at_local[n, k]
                 - expansion.b[n, k] * (d2 - expansion.dist_sq_at_local[n, k]))


def surrogate_objective(positions: np.ndarray, allocation: TimeAllocation,
                        expansion: TaylorExpansion, scenario: Scenario) -> float:
    """Sum of tau * rate_lower over all slots, in bits."""
    pos = np.asarray(positions)[1:]
    diff = pos[:, None, :] - scenario.gbs_positions[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff) + scenario.altitude**2
    low = expansion.rate_at_local[1:] - expansion.b[1:] * (d2 - expansion.dist_sq_at_local[1:])
    return float((allocation.tau * low).sum())


class _BarrierProblem:
    """Log-barrier formulation of the convexified trajectory problem.

    Variables ``z = [u[1], ..., u[N-1], s]`` where ``s >= 0`` is an elastic
    slack shared by the capacity constraints (keeps the start strictly
    feasible when those constraints are tight at the expansion point).
    """

    def __init__(self, scenario: Scenario, allocation: TimeAllocation,
                 expansion: TaylorExpansion, eps: float):
        N = expansion.n_slots
        self.N = N
        self.M = M = N - 1
        self.sc = scenario
        self.u_init = expansion.local[0]
        self.u_final = expansion.local[N]
        tau = allocation.tau  # (N, K), row j-1 <-> slot j
        self.a = tau[:M] / BITS_SCALE  # weights for slots 1..N-1, Mbit units
        self.nu = scenario.gbs_positions
        self.omega = expansion.omega[1:N]
        self.q = expansion.q[1:N]
        self.b = expansion.b[1:N]
        self.r0 = expansion.rate_at_local[1:N]
        self.d0 = expansion.dist_sq_at_local[1:N]
        self.eps = eps
        self.s2 = scenario.s_max**2

        # objective: sum_j [ -w_j |u_j|^2 + 2 c_j . u_j ] + const
        ab = self.a * self.b
        self.w = ab.sum(axis=1)
        self.c = ab @ self.nu

        cap = scenario.slot_capacity_bits / BITS_SCALE
        last = tau[N - 1] * expansion.rate_at_local[N] / BITS_SCALE  # fixed final-slot load
        self.cap_rhs = (N - np.arange(1, M + 1))[None, :] * cap[:, None] - last[:, None]
        # suffix start n is active for GBS k if some slot j >= n carries load
        suffix_load = np.cumsum(self.a[::-1], axis=0)[::-1].T  # (K, M)
        self.cap_active = suffix_load > 0
        self.guard_active = self.a > 0  # (M, K)
        self.upper = np.triu(np.ones((M, M)))

    def positions(self, z: np.ndarray) -> np.ndarray:
        return np.vstack([self.u_init, z[:-1].reshape(self.M, 2), self.u_final])

    def _ell(self, U: np.ndarray) -> np.ndarray:
        return self.q + 2.0 * np.einsum("jkd,jd->jk", self.omega, U)

    def slacks(self, z: np.ndarray):
        """All barrier arguments; each must be strictly positive."""
        U = z[:-1].reshape(self.M, 2)
        s = z[-1]
        P = self.positions(z)
        delta = np.diff(P, axis=0)
        speed = self.s2 - np.einsum("nd,nd->n", delta, delta)
        ell = self._ell(U)
        guard = (ell - self.eps)[self.guard_active]
        with np.errstate(divide="ignore", invalid="ignore"):
            rup = self.sc.bandwidth * np.log2(1.0 + self.sc.snr_ref / ell)
        load = np.where(self.a > 0, self.a * rup, 0.0)  # (M, K)
        suffix = np.cumsum(load[::-1], axis=0)[::-1].T  # (K, M)
        cap = (self.cap_rhs - suffix + s)[self.cap_active]
        return speed, guard, cap, s

    def is_strict(self, z: np.ndarray) -> bool:
        speed, guard, cap, s = self.slacks(z)
        return bool(s > 0 and np.all(speed > 0) and np.all(guard > 0) and np.all(cap > 0)
                    and np.all(np.isfinite(cap)))

    def objective(self, z: np.ndarray) -> float:
        """Surrogate bits in Mbit, without the elastic penalty."""
        U = z[:-1].reshape(self.M, 2)
        diff = U[:, None, :] - self.nu[None, :, :]
        d2 = np.einsum("jkd,jkd->jk", diff, diff) + self.sc.altitude**2
        return float((self.a * (self.r0 - self.b * (d2 - self.d0))).sum())

    def value(self, z: np.ndarray, t: float) -> float:
        speed, guard, cap, s = self.slacks(z)
        if s <= 0 or np.any(speed <= 0) or np.any(guard <= 0) or np.any(cap <= 0):
            return math.inf
        return (-t * (self.objective(z) - ELASTIC_PENALTY * s)
                - np.log(speed).sum() - np.log(guard).sum() - np.log(cap).sum() - math.log(s))

    def n_constraints(self) -> int:
        return self.N + int(self.guard_active.sum()) + int(self.cap_active.sum()) + 1

    def grad_hess(self, z: np.ndarray, t: float):
        M = self.M
        nz = 2 * M + 1
        U = z[:-1].reshape(M, 2)
        s = z[-1]
        g = np.zeros(nz)
        H = np.zeros((nz, nz))
        gu = g[:-1].reshape(M, 2)  # view

        # objective: -t * (F - pen * s)
        gu += 2.0 * t * (self.w[:, None] * U - self.c)
        g[-1] += t * ELASTIC_PENALTY
        idx = np.arange(2 * M)
        H[idx, idx] += 2.0 * t * np.repeat(self.w, 2)

        # speed constraints, n = 1..N
        P = self.positions(z)
        delta = np.diff(P, axis=0)  # (N, 2)
        sigma = self.s2 - np.einsum("nd,nd->n", delta, delta)
        gd = 2.0 * delta / sigma[:, None]  # gradient wrt P[n]; negated wrt P[n-1]
        Q = (2.0 / sigma)[:, None, None] * np.eye(2) \
            + (4.0 / sigma**2)[:, None, None] * np.einsum("ni,nj->nij", delta, delta)
        for n in range(1, self.N + 1):
            hi = n - 1  # free index of P[n]
            lo = n - 2  # free index of P[n-1]
            if 1 <= n <= M:
                gu[hi] += gd[n - 1]
                H[2 * hi:2 * hi + 2, 2 * hi:2 * hi + 2] += Q[n - 1]
            if 1 <= n - 1 <= M:
                gu[lo] -= gd[n - 1]
                H[2 * lo:2 * lo + 2, 2 * lo:2 * lo + 2] += Q[n - 1]
            if 1 <= n <= M and 1 <= n - 1 <= M:
                H[2 * hi:2 * hi + 2, 2 * lo:2 * lo + 2] -= Q[n - 1]
                H[2 * lo:2 * lo + 2, 2 * hi:2 * hi + 2] -= Q[n - 1]

        ell = self._ell(U)  # (M, K)

        # domain guard: ell - eps > 0
        gm = np.where(self.guard_active, 1.0 / np.where(self.guard_active, ell - self.eps, 1.0),
                      0.0)
        gu -= 2.0 * np.einsum("jk,jkd->jd", gm, self.omega)
        blocks = 4.0 * np.einsum("jk,jkd,jke->jde", gm**2, self.omega, self.omega)

        # capacity constraints with rate upper bound
        B, rho = self.sc.bandwidth, self.sc.snr_ref
        safe = np.where(self.a > 0, ell, 1.0)
        rup = B * np.log2(1.0 + rho / safe)
        d1 = -B * rho / (LN2 * safe * (safe + rho))
        d2 = B * rho * (2.0 * safe + rho) / (LN2 * safe**2 * (safe + rho) ** 2)
        load = np.where(self.a > 0, self.a * rup, 0.0)
        suffix = np.cumsum(load[::-1], axis=0)[::-1].T  # (K, M)
        h = self.cap_rhs - suffix + s  # (K, M)
        inv_h = np.where(self.cap_active, 1.0 / np.where(self.cap_active, h, 1.0), 0.0)
        for k in range(self.sc.n_gbs):
            if not self.cap_active[k].any():
                continue
            de = (self.a[:, k] * d1[:, k])[:, None] * 2.0 * self.omega[:, k, :]  # (M, 2)
            W = np.cumsum(inv_h[k])  # sum over suffix starts n <= j
            gu += W[:, None] * de
            g[-1] -= inv_h[k].sum()
            blocks += (W * self.a[:, k] * d2[:, k])[:, None, None] * 4.0 * np.einsum(
                "jd,je->jde", self.omega[:, k, :], self.omega[:, k, :])
            G = np.empty((M, nz))
            G[:, :-1] = (self.upper[:, :, None] * de[None, :, :]).reshape(M, 2 * M)
            G[:, -1] = -1.0
            act = self.cap_active[k]
            Ga = G[act]
            H += Ga.T @ (inv_h[k][act, None] ** 2 * Ga)

        for j in range(M):
            H[2 * j:2 * j + 2, 2 * j:2 * j + 2] += blocks[j]

        g[-1] -= 1.0 / s
        H[-1, -1] += 1.0 / s**2
        return g, H


def _straight(u0, u1, N):
    frac = np.arange(N + 1)[:, None] / N
    return u0 + frac * (u1 - u0)


def solve_subproblem(scenario: Scenario, allocation: TimeAllocation, expansion: TaylorExpansion,
                     config: SolverConfig | None = None) -> Trajectory:
    """Maximize the surrogate bits over the trajectory for one SCA step."""
    config = config or SolverConfig()
    N = expansion.n_slots
    local = Trajectory(expansion.local)
    if allocation.tau.shape != (N, scenario.n_gbs):
        raise ValueError("allocation does not match the expansion")
    if N < 2 or not np.any(allocation.tau[:N - 1] > 0):
        return local
    if N * scenario.s_max <= scenario.chord_length * (1.0 + 1e-12) + 1e-9:
        return local  # speed-tight: the straight path is the only feasible trajectory

    prob = _BarrierProblem(scenario, allocation, expansion, config.domain_eps)
    z = np.concatenate([expansion.local[1:N].reshape(-1), [0.0]])

    # strict speed feasibility: blend toward the straight chord if needed
    straight = _straight(expansion.local[0], expansion.local[N], N)[1:N].reshape(-1)
    theta = 1e-6
    while True:
        speed = prob.slacks(z)[0]
        if np.all(speed > 1e-12 * prob.s2):
            break
        if theta > 1.0:
            raise SubproblemError("cannot find a strictly speed-feasible start", z)
        z[:-1] = (1.0 - theta) * expansion.local[1:N].reshape(-1) + theta * straight
        theta *= 10.0

    z[-1] = 1.0
    _, _, cap, _ = prob.slacks(z)
    worst = float(np.max(1.0 - cap)) if cap.size else 0.0
    z[-1] = max(worst, 0.0) + ELASTIC_MARGIN
    if not prob.is_strict(z):
        raise SubproblemError("start point is not strictly feasible", z)

    m = prob.n_constraints()
    f0 = abs(prob.objective(z))
    t = m / max(1e-2 * f0, 1e-3)
    while True:
        z = _newton_centre(prob, z, t, config)
        if m / t < config.subproblem_tol:
            break
        t *= config.barrier_mu

    positions = prob.positions(z)
    return Trajectory(positions)


def _newton_centre(prob: _BarrierProblem, z: np.ndarray, t: float,
                   config: SolverConfig) -> np.ndarray:
    val = prob.value(z, t)
    for _ in range(config.newton_max_iters):
        g, H = prob.grad_hess(z, t)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        dec = -float(g @ step)
        if not np.isfinite(dec):
            raise SubproblemError("non-finite Newton step", z)
        # decrement below the round-off level of the barrier value
        if dec / 2.0 <= 1e-10 * max(1.0, abs(val)):
            return z
        alpha = 1.0
        while True:
            cand = z + alpha * step
            cval = prob.value(cand, t)
            if cval <= val - 0.25 * alpha * dec:
                break
            alpha *= 0.5
            if alpha < 1e-14:
                # no further progress at this precision
                if dec / 2.0 <= 1e-7 * max(1.0, abs(val)):
                    return z
                raise SubproblemError(
                    f"line search stalled (decrement {dec:.3g}, t={t:.3g})", z)
        z, val = cand, cval
    return z


@dataclass
class ScaDiagnostics:
    objective: list[float] = field(default_factory=list)
    iterations: int = 0
    reason: str = ""
    max_violation: list[float] = field(default_factory=list)


def _exact_bits(positions: np.ndarray, allocation: TimeAllocation, scenario: Scenario) -> float:
    return float((allocation.tau * rate_matrix(positions[1:], scenario)).sum())


def _capacity_violation(traj: Trajectory, allocation: TimeAllocation, scenario: Scenario) -> float:
    slack = capacity_slack(traj, allocation, scenario) / scenario.cycles_per_bit[:, None]
    return max(0.0, -float(slack.min()) / BITS_SCALE)


def optimize_trajectory(scenario: Scenario, allocation: TimeAllocation, init: Trajectory,
                        config: SolverConfig | None = None) -> tuple[Trajectory, ScaDiagnostics]:
    """Run the SCA loop from ``init``; returns the best trajectory and its trace.

    Only iterates that do not decrease the exact offloaded bits and keep the
    capacity constraints within tolerance are accepted.
    """
    config = config or SolverConfig()
    diag = ScaDiagnostics()
    traj = init
    best = _exact_bits(init.positions, allocation, scenario)
    diag.objective.append(best)
    diag.max_violation.append(_capacity_violation(init, allocation, scenario))
    diag.reason = "max-iters"
    for it in range(1, config.sca_max_iters + 1):
        diag.iterations = it
        expansion = expand_at(traj, scenario)
        try:
            cand = solve_subproblem(scenario, allocation, expansion, config)
        except SubproblemError as exc:
            log.warning("SCA iteration %d: subproblem failed: %s", it, exc)
            diag.reason = "subproblem-failure"
            break
        value = _exact_bits(cand.positions, allocation, scenario)
        viol = _capacity_violation(cand, allocation, scenario)
        if config.trace:
            log.info("sca iter=%d bits=%.9g max_violation=%.3g", it, value, viol)
        if value < best or viol > config.validation_tol:
            diag.reason = "converged"
            break
        gain = value - best
        traj, best = cand, value
        diag.objective.append(value)
        diag.max_violation.append(viol)
        if gain <= config.sca_tol * max(abs(best), 1.0):
            diag.reason = "converged"
            break
    return traj, diag
