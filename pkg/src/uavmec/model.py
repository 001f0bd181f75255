"""Problem instance, link model and constraint checks.

Conventions used throughout the package:

* GBS indices are 0-based (``k in range(K)``).
* A trajectory with ``N`` slots stores ``N + 1`` horizontal positions
  ``u[0..N]``; ``u[0]`` is the start point and ``u[N]`` the end point.
* Allocation row ``n - 1`` holds the durations of slot ``n`` (``n = 1..N``).
  Bits sent in slot ``n`` use the rate at ``u[n]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Absolute tolerance in natural units: metres, seconds, Mbits.
FEAS_TOL = 1e-6
BITS_SCALE = 1e6


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def _as_points(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must be a sequence of 2-D points, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _as_point(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite 2-D point")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Immutable problem instance, SI units and linear scale throughout."""

    gbs_positions: np.ndarray
    cpu_freq: np.ndarray
    cycles_per_bit: np.ndarray
    altitude: float
    bandwidth: float
    ref_gain: float
    noise_power: float
    tx_power: float
    v_max: float
    slot_len: float
    u_init: np.ndarray
    u_final: np.ndarray
    task_bits: float = 0.0

    def __post_init__(self):
        pos = _as_points(self.gbs_positions, "gbs_positions")
        K = pos.shape[0]
        if K < 1:
            raise ValueError("need at least one GBS")
        freq = np.broadcast_to(np.asarray(self.cpu_freq, dtype=float), (K,)).copy()
        cycles = np.broadcast_to(np.asarray(self.cycles_per_bit, dtype=float), (K,)).copy()
        if not (np.all(freq > 0) and np.all(np.isfinite(freq))):
            raise ValueError("cpu_freq must be positive and finite")
        if not (np.all(cycles > 0) and np.all(np.isfinite(cycles))):
            raise ValueError("cycles_per_bit must be positive and finite")
        for name in ("altitude", "bandwidth", "ref_gain", "noise_power", "tx_power",
                     "v_max", "slot_len"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)
        bits = float(self.task_bits)
        if not (bits >= 0 and math.isfinite(bits)):
            raise ValueError(f"task_bits must be non-negative, got {bits}")
        object.__setattr__(self, "task_bits", bits)
        object.__setattr__(self, "gbs_positions", _freeze(pos))
        object.__setattr__(self, "cpu_freq", _freeze(freq))
        object.__setattr__(self, "cycles_per_bit", _freeze(cycles))
        object.__setattr__(self, "u_init", _freeze(_as_point(self.u_init, "u_init")))
        object.__setattr__(self, "u_final", _freeze(_as_point(self.u_final, "u_final")))
        if not (math.isfinite(self.snr_ref) and self.snr_ref > 0):
            raise ValueError("reference SNR must be positive and finite")

    @property
    def n_gbs(self) -> int:
        return self.gbs_positions.shape[0]

    @property
    def snr_ref(self) -> float:
        """Reference SNR at 1 m, in m^2 (P * beta0 / sigma^2)."""
        return self.tx_power * self.ref_gain / self.noise_power

    @property
    def s_max(self) -> float:
        return self.slot_len * self.v_max

    @property
    def slot_capacity_bits(self) -> np.ndarray:
        """Bits each GBS can execute per slot: f_k * dt / c_k."""
        return self.cpu_freq * self.slot_len / self.cycles_per_bit

    @property
    def chord_length(self) -> float:
        return float(np.linalg.norm(self.u_final - self.u_init))

    def replace(self, **changes) -> "Scenario":
        kwargs = {
            name: getattr(self, name)
            for name in self.__dataclass_fields__
        }
        kwargs.update(changes)
        return Scenario(**kwargs)


def reference_scenario(gbs_positions, u_init, u_final, task_bits=0.0, **overrides) -> Scenario:
    """Scenario with the standard radio/UAV/CPU parameter set.

    B = 1 MHz, H = 50 m, beta0 = -30 dB, sigma^2 = -60 dBm, P = 30 dBm,
    V_max = 50 m/s, f_k = 2.5 GHz, c_k = 1e3 cycles/bit, dt = 1 s.
    """
    params = dict(
        cpu_freq=2.5e9,
        cycles_per_bit=1e3,
        altitude=50.0,
        bandwidth=1e6,
        ref_gain=db_to_linear(-30.0),
        noise_power=dbm_to_watts(-60.0),
        tx_power=dbm_to_watts(30.0),
        v_max=50.0,
        slot_len=1.0,
    )
    params.update(overrides)
    return Scenario(gbs_positions=gbs_positions, u_init=u_init, u_final=u_final,
                    task_bits=task_bits, **params)


@dataclass(frozen=True, eq=False)
class Trajectory:
    positions: np.ndarray

    def __post_init__(self):
        pos = _as_points(self.positions, "positions")
        if pos.shape[0] < 2:
            raise ValueError("a trajectory needs at least one slot (two positions)")
        object.__setattr__(self, "positions", _freeze(pos))

    @property
    def n_slots(self) -> int:
        return self.positions.shape[0] - 1

    def step_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.positions, axis=0), axis=1)


@dataclass(frozen=True, eq=False)
class TimeAllocation:
    """``tau[n - 1, k]``: seconds of slot ``n`` spent offloading to GBS ``k``."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float)
        if tau.ndim != 2:
            raise ValueError(f"tau must be an N x K matrix, got shape {tau.shape}")
        object.__setattr__(self, "tau", _freeze(tau))

    @classmethod
    def zeros(cls, n_slots: int, n_gbs: int) -> "TimeAllocation":
        return cls(np.zeros((n_slots, n_gbs)))

    @property
    def n_slots(self) -> int:
        return self.tau.shape[0]

    def scaled(self, factor: float) -> "TimeAllocation":
        return TimeAllocation(self.tau * factor)


@dataclass
class ValidationReport:
    feasible: bool
    total_bits: float
    per_constraint_slack: list[tuple[str, float]] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)


def _check_index(k: int, scenario: Scenario) -> None:
    if not (0 <= k < scenario.n_gbs):
        raise IndexError(f"GBS index {k} out of range for K={scenario.n_gbs}")


def distance_sq(u, k: int, scenario: Scenario) -> float:
    """Squared UAV-GBS distance H^2 + |u - nu_k|^2."""
    _check_index(k, scenario)
    diff = np.asarray(u, dtype=float) - scenario.gbs_positions[k]
    return scenario.altitude**2 + float(diff @ diff)


def channel_gain(u, k: int, scenario: Scenario) -> float:
    return scenario.ref_gain / distance_sq(u, k, scenario)


def offload_rate(u, k: int, scenario: Scenario) -> float:
    """Achievable rate in bit/s from position ``u`` to GBS ``k``."""
    return scenario.bandwidth * math.log2(1.0 + scenario.snr_ref / distance_sq(u, k, scenario))


def distance_sq_matrix(points, scenario: Scenario) -> np.ndarray:
    """Squared distances, shape ``(len(points), K)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - scenario.gbs_positions[None, :, :]
    return scenario.altitude**2 + np.einsum("nkd,nkd->nk", diff, diff)


def rate_matrix(points, scenario: Scenario) -> np.ndarray:
    """Rates in bit/s for every (point, GBS) pair, shape ``(len(points), K)``."""
    d2 = distance_sq_matrix(points, scenario)
    return scenario.bandwidth * np.log2(1.0 + scenario.snr_ref / d2)


def _check_dims(trajectory: Trajectory, allocation: TimeAllocation, scenario: Scenario) -> int:
    N = trajectory.n_slots
    if allocation.tau.shape != (N, scenario.n_gbs):
        raise ValueError(
            f"allocation shape {allocation.tau.shape} does not match "
            f"N={N}, K={scenario.n_gbs}"
        )
    return N


def slot_bits(trajectory: Trajectory, allocation: TimeAllocation, scenario: Scenario) -> np.ndarray:
    """Bits offloaded per (slot, GBS), shape ``(N, K)``."""
    _check_dims(trajectory, allocation, scenario)
    return allocation.tau * rate_matrix(trajectory.positions[1:], scenario)


def total_offloaded_bits(trajectory: Trajectory, allocation: TimeAllocation,
                         scenario: Scenario) -> float:
    return float(slot_bits(trajectory, allocation, scenario).sum())


def capacity_slack(trajectory: Trajectory, allocation: TimeAllocation,
                   scenario: Scenario) -> np.ndarray:
    """Remaining compute per GBS and suffix start, in cycles, shape ``(K, N)``.

    Entry ``[k, n - 1]`` is ``(N - n) f_k dt - sum_{j >= n} c_k tau_k[j] R_k(u[j])``.
    """
    N = _check_dims(trajectory, allocation, scenario)
    load = slot_bits(trajectory, allocation, scenario) * scenario.cycles_per_bit
    suffix = np.cumsum(load[::-1], axis=0)[::-1]
    remaining = (N - np.arange(1, N + 1))[:, None] * scenario.cpu_freq * scenario.slot_len
    return (remaining - suffix).T


def validate_solution(trajectory: Trajectory, allocation: TimeAllocation, scenario: Scenario,
                      tol: float = FEAS_TOL) -> ValidationReport:
    """Check every constraint of the mission problem; never raises on infeasibility."""
    violations: list[str] = []
    slacks: list[tuple[str, float]] = []
    try:
        N = _check_dims(trajectory, allocation, scenario)
    except ValueError as exc:
        return ValidationReport(False, float("nan"), [], [f"dimensions: {exc}"])

    pos = trajectory.positions
    steps = trajectory.step_lengths()
    speed_slack = float(scenario.s_max - steps.max()) if N else 0.0
    slacks.append(("speed", speed_slack))
    if speed_slack < -tol:
        n = int(np.argmax(steps)) + 1
        violations.append(
            f"speed: slot {n} moves {steps[n - 1]:.6g} m > S_max={scenario.s_max:.6g} m")

    end_err = max(float(np.linalg.norm(pos[0] - scenario.u_init)),
                  float(np.linalg.norm(pos[-1] - scenario.u_final)))
    slacks.append(("endpoints", -end_err))
    if end_err > tol:
        violations.append(f"endpoints: off by {end_err:.6g} m")

    tau = allocation.tau
    tdma_slack = float(scenario.slot_len - tau.sum(axis=1).max())
    slacks.append(("tdma", tdma_slack))
    if tdma_slack < -tol:
        n = int(np.argmax(tau.sum(axis=1))) + 1
        violations.append(f"tdma: slot {n} uses {tau[n - 1].sum():.9g} s > dt")

    nonneg_slack = float(tau.min())
    slacks.append(("nonnegativity", nonneg_slack))
    if nonneg_slack < -tol:
        violations.append(f"nonnegativity: min tau = {nonneg_slack:.6g} s")

    total = total_offloaded_bits(trajectory, allocation, scenario)
    bits_slack = (total - scenario.task_bits) / BITS_SCALE
    slacks.append(("total_bits", bits_slack))
    if bits_slack < -tol:
        violations.append(
            f"total bits: offloaded {total:.9g} < L={scenario.task_bits:.9g}")

    # cycles -> Mbits so the tolerance is on the same scale as the total-bits check
    cap = capacity_slack(trajectory, allocation, scenario) / scenario.cycles_per_bit[:, None]
    cap /= BITS_SCALE
    worst = float(cap.min())
    slacks.append(("capacity", worst))
    if worst < -tol:
        k, n = np.unravel_index(np.argmin(cap), cap.shape)
        violations.append(
            f"capacity: GBS {k} overloaded from slot {n + 1} by {-worst:.6g} Mbit")

    return ValidationReport(not violations, total, slacks, violations)
