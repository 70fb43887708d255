"""Seeded Monte Carlo campaigns over both solvers and per-QoS-group statistics.

Trial ``t`` draws its capacities from seed ``base_seed + t``; the heuristic
uses an independent stream of the same seed. Every solver output is checked
with the independent verifier inside the trial. Results are keyed by trial
index and reduced in index order, so the outcome does not depend on how many
worker processes ran the trials.
"""

from __future__ import annotations

import dataclasses
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .channel import generate_capacities
from .config import SOLVER_NAMES, CampaignConfig
from .constraints import ConstraintSystem, build_constraint_system, in_window, verify
from .errors import EmptySamples
from .result import SolveResult, Status
from .solver_exact import SolverOptions, solve_exact
from .solver_mikp import run_mikp

CONFLICT_TYPES = ("type2", "type3", "type4")
SUCCESS = {"exact": Status.OPTIMAL.value, "mikp": Status.HEURISTIC.value}


@dataclass(frozen=True)
class GroupStats:
    qos_group: float
    mean: float
    max: float
    min: float
    sample_std: float
    sample_count: int


def aggregate_stats(samples, qos_group: float = 0.0) -> GroupStats:
    """Mean, extremes and sample standard deviation (n-1 divisor, 0 for one sample)."""
    values = [float(v) for v in samples]
    if not values:
        raise EmptySamples("cannot aggregate an empty sample list")
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return GroupStats(qos_group, statistics.fmean(values), max(values), min(values), std, len(values))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    solver: str
    status: str
    objective: float
    rates: tuple[float, ...] | None
    conflicts: dict
    qos_violations: int
    served: int
    nodes: int = 0
    error: str | None = None
    elapsed: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class SolverSummary:
    solver: str
    trials: int
    successes: int
    infeasible: int
    timeouts: int
    errors: int
    feasibility_rate: float
    conflicts: dict
    qos_violations: int
    fully_served_trials: int
    groups: tuple[GroupStats, ...]


@dataclass(frozen=True)
class CampaignResult:
    config: dict
    summaries: tuple[SolverSummary, ...]
    records: tuple[TrialRecord, ...]

    def summary(self, solver: str) -> SolverSummary:
        for sm in self.summaries:
            if sm.solver == solver:
                return sm
        raise KeyError(solver)

    def total_conflicts(self) -> int:
        return sum(sum(sm.conflicts.values()) for sm in self.summaries)

    def total_errors(self) -> int:
        return sum(sm.errors for sm in self.summaries)


def _served(res: SolveResult, c, cs: ConstraintSystem, scenario, grid) -> int:
    """Vehicles that got service, or could not have used any subchannel.

    A vehicle left without subchannels still counts as served when every
    subchannel of its matched subframe is taken by a one-hop partner or
    exceeds its demand, so the knapsack had nothing admissible to pick.
    """
    if res.assignment is None:
        return 0
    x = res.assignment.x
    subframes = res.diagnostics.get("subframes")
    partners: dict[int, list[int]] = {}
    for p in cs.hop_pairs:
        partners.setdefault(p.first, []).append(p.second)
        partners.setdefault(p.second, []).append(p.first)
    served = 0
    for v in scenario.vehicles():
        row = x[v - 1]
        if row.any():
            served += 1
            continue
        if subframes is None or v not in subframes:
            continue
        l = subframes[v]
        ks = range((l - 1) * grid.K, l * grid.K)
        blocked = {k for p in partners.get(v, ()) for k in ks if x[p - 1, k]}
        if all(k in blocked or c.rates[v - 1, k] > scenario.q(v) for k in ks):
            served += 1
    return served


def run_trial(cfg: CampaignConfig, t: int, cs: ConstraintSystem | None = None) -> list[TrialRecord]:
    """Run every enabled solver on trial ``t`` and verify the outputs."""
    s, g = cfg.scenario, cfg.grid
    cs = cs or build_constraint_system(s, g)
    seed = cfg.base_seed + t
    c = generate_capacities(s, g, dataclasses.replace(cfg.channel, seed=seed))
    out = []
    for name in cfg.solvers:
        try:
            if name == "exact":
                res = solve_exact(s, g, c, cs, SolverOptions(time_limit=cfg.time_limit, node_limit=cfg.node_limit))
            else:
                res = run_mikp(s, g, c, cs, seed, cfg.resolution)
        except Exception as exc:  # recorded per trial, never fatal to the campaign
            out.append(TrialRecord(t, seed, name, "error", 0.0, None, dict.fromkeys(CONFLICT_TYPES, 0), 0, 0,
                                   error=f"{type(exc).__name__}: {exc}"))
            continue
        conflicts = dict.fromkeys(CONFLICT_TYPES, 0)
        qos_bad = 0
        rates = None
        if res.assignment is not None:
            report = verify(res.assignment, s, g, c, cs)
            conflicts = {k: v for k, v in report.counts().items() if k in CONFLICT_TYPES}
            qos_bad = len(report.qos_violations)
            rates = tuple(float(r) for r in res.per_vehicle_rate)
        served = _served(res, c, cs, s, g) if name == "mikp" else (s.N if res.status is Status.OPTIMAL else 0)
        out.append(TrialRecord(t, seed, name, res.status.value, float(res.objective), rates, conflicts,
                               qos_bad, served, res.nodes_explored, res.diagnostics.get("message"),
                               res.elapsed))
    return out


def _trial_chunk(cfg: CampaignConfig, indices) -> list[list[TrialRecord]]:
    cs = build_constraint_system(cfg.scenario, cfg.grid)
    return [run_trial(cfg, t, cs) for t in indices]


def summarize(cfg: CampaignConfig, records) -> tuple[SolverSummary, ...]:
    s = cfg.scenario
    groups = sorted(set(s.qos), reverse=True)
    out = []
    for name in cfg.solvers:
        recs = [r for r in records if r.solver == name]
        ok = [r for r in recs if r.status == SUCCESS[name]]
        conflicts = {k: sum(r.conflicts[k] for r in recs) for k in CONFLICT_TYPES}
        stats = []
        for q in groups:
            samples = [r.rates[v - 1] for r in ok for v in s.vehicles() if s.q(v) == q]
            if samples:
                stats.append(aggregate_stats(samples, q))
        out.append(SolverSummary(
            solver=name,
            trials=len(recs),
            successes=len(ok),
            infeasible=sum(r.status == Status.INFEASIBLE.value for r in recs),
            timeouts=sum(r.status == Status.TIMEOUT.value for r in recs),
            errors=sum(r.status == "error" for r in recs),
            feasibility_rate=len(ok) / len(recs) if recs else 0.0,
            conflicts=conflicts,
            qos_violations=sum(r.qos_violations for r in ok),
            fully_served_trials=sum(r.served == s.N for r in ok),
            groups=tuple(stats),
        ))
    return tuple(out)


def run_trials(cfg: CampaignConfig, workers: int | None = None, progress=None) -> CampaignResult:
    """Run the whole campaign; ``workers`` overrides the config's pool size."""
    workers = workers or cfg.workers
    indices = list(range(cfg.trials))
    if workers <= 1:
        cs = build_constraint_system(cfg.scenario, cfg.grid)
        per_trial = []
        for t in indices:
            per_trial.append(run_trial(cfg, t, cs))
            if progress:
                progress(t + 1, cfg.trials)
    else:
        size = max(1, math.ceil(len(indices) / (workers * 4)))
        chunks = [indices[i:i + size] for i in range(0, len(indices), size)]
        per_trial = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for done in pool.map(partial(_trial_chunk, cfg), chunks):
                per_trial.extend(done)
                if progress:
                    progress(len(per_trial), cfg.trials)
    records = tuple(r for trial in per_trial for r in trial)
    return CampaignResult(cfg.summary(), summarize(cfg, records), records)


def rates_in_window(record: TrialRecord, scenario) -> bool:
    """True when every rate of the trial lies inside its QoS window."""
    return all(in_window(r, scenario.q(v), scenario.epsilon) for v, r in zip(scenario.vehicles(), record.rates))


__all__ = [
    "CONFLICT_TYPES", "SOLVER_NAMES", "GroupStats", "TrialRecord", "SolverSummary", "CampaignResult",
    "aggregate_stats", "run_trial", "run_trials", "summarize", "rates_in_window",
]
