"""Minimum-time trajectory and offloading design for a cellular-connected UAV.

The UAV flies from ``u_init`` to ``u_final`` at fixed altitude and offloads a
partitionable task of ``task_bits`` bits to ground base stations (GBSs) with
edge servers, sharing each slot among them by TDMA. The mission time is
minimized by a search over the slot count N, where each N is tested by
alternating a time-allocation LP and an SCA trajectory update.
"""

from .baselines import solve_hover_and_fly, solve_straight_flight, tsp_visit_order
from .config import SolverConfig
from .lp import solve_time_allocation
from .model import (
    Scenario,
    TimeAllocation,
    Trajectory,
    offload_rate,
    reference_scenario,
    validate_solution,
)
from .planner import MissionPlan, PlanningError, check_feasibility, maximize_bits, min_completion_time
from .sca import optimize_trajectory

__all__ = [
    "MissionPlan",
    "PlanningError",
    "Scenario",
    "SolverConfig",
    "TimeAllocation",
    "Trajectory",
    "check_feasibility",
    "maximize_bits",
    "min_completion_time",
    "offload_rate",
    "optimize_trajectory",
    "reference_scenario",
    "solve_hover_and_fly",
    "solve_straight_flight",
    "solve_time_allocation",
    "tsp_visit_order",
    "validate_solution",
]
