"""Solver output shared by the exact and heuristic solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .constraints import Assignment, vehicle_rates


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIMEOUT = "timeout"
    HEURISTIC = "heuristic"


@dataclass
class SolveResult:
    status: Status
    assignment: Assignment | None
    objective: float
    per_vehicle_rate: np.ndarray
    elapsed: float = 0.0
    nodes_explored: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def proven_optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    @property
    def has_assignment(self) -> bool:
        return self.assignment is not None

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "objective_mbps": self.objective / 1e6,
            "per_vehicle_rate_mbps": [r / 1e6 for r in self.per_vehicle_rate.tolist()],
            "elapsed_s": self.elapsed,
            "nodes_explored": self.nodes_explored,
            "diagnostics": self.diagnostics,
        }


def result_from_assignment(status: Status, x: np.ndarray | None, rates: np.ndarray, N: int, **kw) -> SolveResult:
    """Fill objective and per-vehicle rates consistently from an assignment."""
    if x is None:
        return SolveResult(status, None, 0.0, np.zeros(N), **kw)
    per = vehicle_rates(x, rates)
    return SolveResult(status, Assignment(x), math.fsum(per.tolist()), per, **kw)
