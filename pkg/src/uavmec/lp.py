"""Dense two-phase simplex and the time-allocation LP built on it."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import SolverConfig
from .model import BITS_SCALE, Scenario, TimeAllocation, Trajectory, rate_matrix

log = logging.getLogger(__name__)

LE, EQ, GE = "<=", "=", ">="

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
# consecutive degenerate pivots before switching to Bland's rule
DEGENERATE_STREAK = 50


class LpError(RuntimeError):
    """The simplex engine gave up (pivot cap hit or numerical breakdown)."""


@dataclass
class LinearProgram:
    """maximize ``c @ x`` subject to ``A[i] @ x  senses[i]  b[i]`` and ``x >= lower``."""

    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    b: np.ndarray
    lower: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        m = self.A.shape[0]
        if self.b.size != m or len(self.senses) != m:
            raise ValueError("A, b and senses disagree on the number of rows")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise ValueError(f"unknown constraint sense in {set(self.senses)}")
        self.lower = (np.zeros(n) if self.lower is None
                      else np.asarray(self.lower, dtype=float).reshape(n))
        for name in ("c", "A", "b", "lower"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float
    pivots: int = 0


class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, max_pivots: int):
        self.T = T
        self.basis = basis
        self.max_pivots = max_pivots
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        rows = np.nonzero(col)[0]
        T[rows] -= np.outer(col[rows], T[r])
        T[rows, j] = 0.0
        self.basis[r] = j
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise LpError(f"simplex exceeded {self.max_pivots} pivots")

    def run(self, n_cols: int) -> str:
        """Optimize the objective held in the last row over the first ``n_cols`` columns."""
        T = self.T
        m = T.shape[0] - 1
        bland = False
        streak = 0
        while True:
            d = T[-1, :n_cols]
            if bland:
                candidates = np.nonzero(d > OPT_TOL)[0]
                if candidates.size == 0:
                    return "optimal"
                j = int(candidates[0])
            else:
                j = int(np.argmax(d))
                if d[j] <= OPT_TOL:
                    return "optimal"
            col = T[:m, j]
            mask = col > PIVOT_TOL
            if not mask.any():
                return "unbounded"
            rhs = T[:m, -1]
            ratios = np.full(m, np.inf)
            ratios[mask] = rhs[mask] / col[mask]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
            r = int(ties[np.argmin(self.basis[ties])])
            if rhs[r] <= PIVOT_TOL:
                streak += 1
                if streak > DEGENERATE_STREAK and not bland:
                    log.debug("simplex: switching to Bland's rule after %d degenerate pivots",
                              streak)
                    bland = True
            else:
                streak = 0
            self.pivot(r, j)


def lp_solve(problem: LinearProgram, config: SolverConfig | None = None) -> LpSolution:
    """Solve ``problem`` with a dense two-phase simplex method.

    Raises ``LpError`` if the pivot budget is exhausted.
    """
    config = config or SolverConfig()
    A = problem.A
    m, n = A.shape
    b = problem.b - A @ problem.lower
    senses = list(problem.senses)

    A = A.copy()
    flip = b < 0
    A[flip] *= -1
    b = np.where(flip, -b, b)
    senses = [
        {LE: GE, GE: LE, EQ: EQ}[s] if f else s for s, f in zip(senses, flip)
    ]

    n_slack = sum(s != EQ for s in senses)
    art_rows = [i for i, s in enumerate(senses) if s != LE]
    n_art = len(art_rows)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    col = n
    for i, s in enumerate(senses):
        if s == LE:
            T[i, col] = 1.0
            basis[i] = col
            col += 1
        elif s == GE:
            T[i, col] = -1.0
            col += 1
    for a, i in enumerate(art_rows):
        T[i, n + n_slack + a] = 1.0
        basis[i] = n + n_slack + a

    tab = _Tableau(T, basis, config.lp_max_pivots)

    if n_art:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, :n + n_slack] = T[art_rows, :n + n_slack].sum(axis=0)
        T[-1, -1] = T[art_rows, -1].sum()
        tab.run(n + n_slack)
        infeas = T[-1, -1]
        if infeas > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
            return LpSolution("infeasible", None, float("nan"), tab.pivots)
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n + n_slack:
                row = T[r, :n + n_slack]
                nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    keep[r] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[-1:]])
            tab.T = T
            tab.basis = tab.basis[keep]
            m = T.shape[0] - 1
        T = np.hstack([T[:, :n + n_slack], T[:, -1:]])
        tab.T = T

    cost = np.zeros(n + n_slack)
    cost[:n] = problem.c
    T[-1, :-1] = cost - cost[tab.basis] @ T[:m, :-1]
    T[-1, -1] = -cost[tab.basis] @ T[:m, -1]
    status = tab.run(n + n_slack)
    if status == "unbounded":
        return LpSolution("unbounded", None, float("inf"), tab.pivots)

    y = np.zeros(n + n_slack)
    y[tab.basis] = T[:m, -1]
    x = y[:n] + problem.lower
    return LpSolution("optimal", x, float(problem.c @ x), tab.pivots)


def allocation_lp(scenario: Scenario, trajectory: Trajectory) -> tuple[LinearProgram, np.ndarray]:
    """Build the time-allocation LP in Mbit units.

    Variables are ``tau_k[n]`` for slots ``n = 1..N-1`` (row-major, slot then
    GBS); the last slot's durations are fixed to zero. Returns the LP and the
    rate matrix (bit/s) of the usable slots.
    """
    N = trajectory.n_slots
    K = scenario.n_gbs
    M = N - 1
    rates = rate_matrix(trajectory.positions[1:N], scenario)
    r = rates / BITS_SCALE
    cap = scenario.slot_capacity_bits / BITS_SCALE
    dt = scenario.slot_len
    nv = M * K

    rows = []
    rhs = []
    # TDMA: sum_k tau_k[n] <= dt
    tdma = np.zeros((M, nv))
    for n in range(M):
        tdma[n, n * K:(n + 1) * K] = 1.0
    rows.append(tdma)
    rhs.append(np.full(M, dt))
    # capacity: sum_{j >= n} tau_k[j] r_k[j] <= (N - n) cap_k for n = 1..N-1
    capm = np.zeros((K * M, nv))
    caprhs = np.zeros(K * M)
    for k in range(K):
        for n in range(M):
            i = k * M + n
            js = np.arange(n, M)
            capm[i, js * K + k] = r[js, k]
            caprhs[i] = (N - (n + 1)) * cap[k]
    rows.append(capm)
    rhs.append(caprhs)

    A = np.vstack(rows) if nv else np.zeros((0, 0))
    b = np.concatenate(rhs)
    c = r.reshape(-1)
    return LinearProgram(c, A, [LE] * A.shape[0], b), rates


def solve_time_allocation(scenario: Scenario, trajectory: Trajectory,
                          config: SolverConfig | None = None) -> tuple[TimeAllocation, float]:
    """Maximize offloaded bits over the time allocation for a fixed trajectory.

    Returns the allocation and the achieved number of bits.
    """
    N = trajectory.n_slots
    K = scenario.n_gbs
    tau = np.zeros((N, K))
    if N <= 1:
        return TimeAllocation(tau), 0.0
    problem, rates = allocation_lp(scenario, trajectory)
    sol = lp_solve(problem, config)
    if sol.status != "optimal":
        raise LpError(f"time-allocation LP returned status {sol.status!r}")
    x = np.clip(sol.x, 0.0, None)
    tau[:N - 1] = x.reshape(N - 1, K)
    # repair round-off so TDMA holds exactly
    over = tau.sum(axis=1) > scenario.slot_len
    if over.any():
        tau[over] *= (scenario.slot_len / tau[over].sum(axis=1))[:, None]
    bits = float((tau[:N - 1] * rates).sum())
    return TimeAllocation(tau), bits
