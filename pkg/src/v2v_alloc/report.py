"""CSV and JSON serialization of campaign results.

CSV holds one row per (solver, QoS group) in Mbps with four decimals. JSON
holds the full result, including per-trial records, and parses back to an
equal ``CampaignResult``. Wall-clock times are left out unless requested so
that reruns produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ReportWriteError
from .harness import CampaignResult, GroupStats, SolverSummary, TrialRecord

CSV_COLUMNS = ("solver", "qos_mbps", "mean", "max", "min", "std", "samples")


def _mbps(value: float) -> str:
    return f"{value / 1e6:.4f}"


def emit_csv(r: CampaignResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for sm in r.summaries:
        for gs in sm.groups:
            writer.writerow([sm.solver, f"{gs.qos_group / 1e6:g}", _mbps(gs.mean), _mbps(gs.max),
                             _mbps(gs.min), _mbps(gs.sample_std), gs.sample_count])
    return buf.getvalue()


def _record_to_dict(rec: TrialRecord, timing: bool) -> dict:
    d = {
        "trial": rec.trial,
        "seed": rec.seed,
        "solver": rec.solver,
        "status": rec.status,
        "objective": rec.objective,
        "rates": list(rec.rates) if rec.rates is not None else None,
        "conflicts": dict(rec.conflicts),
        "qos_violations": rec.qos_violations,
        "served": rec.served,
        "nodes": rec.nodes,
        "error": rec.error,
    }
    if timing:
        d["elapsed"] = rec.elapsed
    return d


def to_dict(r: CampaignResult, timing: bool = False) -> dict:
    solvers = {}
    for sm in r.summaries:
        solvers[sm.solver] = {
            "trials": sm.trials,
            "successes": sm.successes,
            "infeasible": sm.infeasible,
            "timeouts": sm.timeouts,
            "errors": sm.errors,
            "feasibility_rate": sm.feasibility_rate,
            "conflicts": dict(sm.conflicts),
            "qos_violations": sm.qos_violations,
            "fully_served_trials": sm.fully_served_trials,
            "groups": [
                {"qos_group": g.qos_group, "mean": g.mean, "max": g.max, "min": g.min,
                 "sample_std": g.sample_std, "sample_count": g.sample_count}
                for g in sm.groups
            ],
        }
    return {
        "config": r.config,
        "solvers": solvers,
        "trials": [_record_to_dict(rec, timing) for rec in r.records],
    }


def emit_json(r: CampaignResult, timing: bool = False) -> str:
    return json.dumps(to_dict(r, timing), indent=2) + "\n"


def from_dict(d: dict) -> CampaignResult:
    summaries = []
    for name, sd in d["solvers"].items():
        groups = tuple(GroupStats(**g) for g in sd["groups"])
        fields = {k: v for k, v in sd.items() if k != "groups"}
        summaries.append(SolverSummary(solver=name, groups=groups, **fields))
    records = []
    for rd in d["trials"]:
        rd = dict(rd)
        if rd["rates"] is not None:
            rd["rates"] = tuple(rd["rates"])
        records.append(TrialRecord(**rd))
    return CampaignResult(d["config"], tuple(summaries), tuple(records))


def parse_json(text: str) -> CampaignResult:
    return from_dict(json.loads(text))


def emit_report(r: CampaignResult, fmt: str, timing: bool = False) -> str:
    if fmt == "csv":
        return emit_csv(r)
    if fmt == "json":
        return emit_json(r, timing)
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(r: CampaignResult, fmt: str, path, timing: bool = False) -> None:
    text = emit_report(r, fmt, timing)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ReportWriteError(f"cannot write report to {path}: {exc.strerror}") from exc
