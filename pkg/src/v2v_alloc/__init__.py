"""Conflict-free sidelink subchannel allocation for network-assisted V2V.

Exact branch-and-bound solver, the MIKP heuristic (subframe matching plus
per-vehicle subset-sum knapsacks), an independent constraint verifier and a
seeded Monte Carlo harness.
"""

from .channel import CapacityMap, ChannelModelParams, capacity_of, generate_capacities
from .config import CampaignConfig, default_config, load_config, parse_config
from .constraints import Assignment, ConflictReport, ConstraintSystem, build_constraint_system, verify
from .harness import CampaignResult, run_trials
from .result import SolveResult, Status
from .scenario import ChannelGrid, Scenario, scenario_from_lists, validate_scenario
from .solver_exact import SolverOptions, brute_force_solve, solve_exact
from .solver_mikp import run_mikp

__version__ = "0.1.0"

__all__ = [
    "Assignment", "CampaignConfig", "CampaignResult", "CapacityMap", "ChannelGrid", "ChannelModelParams",
    "ConflictReport", "ConstraintSystem", "Scenario", "SolveResult", "SolverOptions", "Status",
    "brute_force_solve", "build_constraint_system", "capacity_of", "default_config", "generate_capacities",
    "load_config", "parse_config", "run_mikp", "run_trials", "scenario_from_lists", "solve_exact",
    "validate_scenario", "verify",
]
