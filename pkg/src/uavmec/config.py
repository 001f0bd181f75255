from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration budgets shared by every solver stage."""

    sca_tol: float = 1e-4
    sca_max_iters: int = 50
    alt_tol: float = 1e-4
    alt_max_iters: int = 20
    subproblem_tol: float = 1e-6
    # relative shortfall of L tolerated when declaring a slot count feasible
    feasibility_tol: float = 1e-9
    # absolute tolerance for validate_solution (m, s, Mbit)
    validation_tol: float = 1e-6
    growth_factor: float = 2.0
    max_slots: int = 1_000_000
    barrier_mu: float = 10.0
    domain_eps: float = 1e-3
    newton_max_iters: int = 100
    lp_max_pivots: int = 50_000
    trace: bool = False

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "trace":
                continue
            if not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value}")
        for name in ("sca_max_iters", "alt_max_iters", "newton_max_iters", "max_slots"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.growth_factor <= 1:
            raise ValueError("growth_factor must exceed 1")
        if self.barrier_mu <= 1:
            raise ValueError("barrier_mu must exceed 1")
