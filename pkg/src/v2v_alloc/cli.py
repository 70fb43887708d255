"""Command-line entry point: ``v2v-alloc run|solve|audit|example``.

Exit codes: 0 success, 1 configuration or input error, 2 campaign-level
failure (conflicts found, trials crashed, or an audited assignment violates
a requirement).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from .channel import CapacityMap, generate_capacities
from .config import CampaignConfig, default_config, load_config, parse_solver_names
from .constraints import Assignment, build_constraint_system, build_G, build_H, build_Q, verify
from .errors import AllocError, ConfigInvalid, ShapeMismatch
from .harness import run_trials
from .report import emit_report, write_report
from .scenario import ChannelGrid, intra_cluster_pairs, one_hop_pairs, scenario_from_lists
from .solver_exact import SolverOptions, solve_exact
from .solver_mikp import run_mikp

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="campaign config (default: shipped reference campaign)")
    p.add_argument("--seed", type=int, help="base seed (run) or instance seed (solve/audit)")
    p.add_argument("--epsilon", type=float, metavar="MBPS", help="QoS tolerance in Mbps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="v2v-alloc", description="Conflict-free V2V sidelink subchannel allocation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    _add_common(run)
    run.add_argument("--trials", type=int)
    run.add_argument("--solver", choices=("exact", "mikp", "both"))
    run.add_argument("--time-limit", type=float, metavar="SECS", help="exact solver limit per trial (0 = none)")
    run.add_argument("--resolution", type=float, metavar="KBPS", help="knapsack DP resolution")
    run.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--workers", type=int)
    run.add_argument("--timing", action="store_true", help="include per-trial wall-clock times in JSON")

    solve = sub.add_parser("solve", help="solve one seeded instance and print the result")
    _add_common(solve)
    solve.add_argument("--solver", choices=("exact", "mikp", "both"), default="both")
    solve.add_argument("--time-limit", type=float, metavar="SECS")
    solve.add_argument("--resolution", type=float, metavar="KBPS")
    solve.add_argument("--save-assignment", metavar="PATH", help="write the assignment matrix (single solver)")
    solve.add_argument("--save-capacities", metavar="PATH", help="write the capacity matrix in bit/s")

    audit = sub.add_parser("audit", help="verify an assignment file against all requirements")
    _add_common(audit)
    audit.add_argument("--assignment", metavar="PATH", required=True)
    audit.add_argument("--capacities", metavar="PATH", help="capacity CSV in bit/s (default: regenerate from seed)")

    sub.add_parser("example", help="print the constraint matrices of the 4-vehicle worked example")
    return parser


def _load(args) -> CampaignConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if getattr(args, "epsilon", None) is not None:
        if args.epsilon < 0:
            raise ConfigInvalid(f"--epsilon must be >= 0, got {args.epsilon}")
        cfg = cfg.with_epsilon(args.epsilon * 1e6)
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "solver", None) is not None:
        changes["solvers"] = parse_solver_names(args.solver)
    if getattr(args, "time_limit", None) is not None:
        changes["time_limit"] = args.time_limit
    if getattr(args, "resolution", None) is not None:
        changes["resolution"] = args.resolution * 1e3
    if getattr(args, "output", None) is not None:
        changes["output"] = args.output
    if getattr(args, "format", None) is not None:
        changes["format"] = args.format
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if args.command == "run" and args.seed is not None:
        changes["base_seed"] = args.seed
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _instance_seed(args, cfg: CampaignConfig) -> int:
    return cfg.base_seed if args.seed is None else args.seed


def save_capacities(c: CapacityMap, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows([[repr(float(v)) for v in row] for row in c.rates])
    Path(path).write_text(buf.getvalue())


def load_capacities(path, grid: ChannelGrid) -> CapacityMap:
    rows = [r for r in csv.reader(io.StringIO(Path(path).read_text())) if r]
    try:
        rates = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError:
        raise ShapeMismatch(f"{path}: capacities must be numeric") from None
    return CapacityMap(rates, grid)


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_trials(cfg)
    text = emit_report(result, cfg.format, timing=args.timing)
    if cfg.output:
        write_report(result, cfg.format, cfg.output, timing=args.timing)
    else:
        sys.stdout.write(text)
    for sm in result.summaries:
        print(f"{sm.solver}: {sm.successes}/{sm.trials} successful, {sm.infeasible} infeasible, "
              f"{sm.timeouts} timeouts, {sm.errors} errors, conflicts {sm.conflicts}", file=sys.stderr)
    if result.total_conflicts() or result.total_errors():
        return EXIT_FAILURE
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    s, g = cfg.scenario, cfg.grid
    seed = _instance_seed(args, cfg)
    c = generate_capacities(s, g, dataclasses.replace(cfg.channel, seed=seed))
    cs = build_constraint_system(s, g)
    if args.save_assignment and len(cfg.solvers) != 1:
        raise ConfigInvalid("--save-assignment needs a single --solver")
    if args.save_capacities:
        save_capacities(c, args.save_capacities)
    out = {"seed": seed}
    failed = False
    for name in cfg.solvers:
        if name == "exact":
            res = solve_exact(s, g, c, cs, SolverOptions(time_limit=cfg.time_limit, node_limit=cfg.node_limit))
        else:
            res = run_mikp(s, g, c, cs, seed, cfg.resolution)
        entry = res.summary()
        entry["diagnostics"] = {k: v for k, v in entry["diagnostics"].items() if k != "subframes"}
        if res.assignment is not None:
            report = verify(res.assignment, s, g, c, cs)
            entry["conflicts"] = {k: v for k, v in report.counts().items() if k != "qos"}
            entry["qos_violations"] = len(report.qos_violations)
            failed |= not report.conflict_free
            if args.save_assignment:
                res.assignment.save(args.save_assignment)
        out[name] = entry
    print(json.dumps(out, indent=2, default=str))
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_audit(args) -> int:
    cfg = _load(args)
    s, g = cfg.scenario, cfg.grid
    if args.capacities:
        c = load_capacities(args.capacities, g)
    else:
        c = generate_capacities(s, g, dataclasses.replace(cfg.channel, seed=_instance_seed(args, cfg)))
    a = Assignment.load(args.assignment)
    cs = build_constraint_system(s, g)
    report = verify(a, s, g, c, cs)
    print(json.dumps({
        "counts": report.counts(),
        "qos_violations": [
            {"vehicle": v, "rate_mbps": r / 1e6, "window_mbps": [w[0] / 1e6, w[1] / 1e6]}
            for v, r, w in report.qos_violations
        ],
        "type2": [{"pair": list(p), "subframe": l} for p, l in report.type2],
        "type3": [{"vehicle": v, "subframes": list(ls)} for v, ls in report.type3],
        "type4": [{"pair": list(p), "subchannel": k} for p, k in report.type4],
    }, indent=2))
    return EXIT_OK if report.is_empty else EXIT_FAILURE


def worked_example():
    """The 4-vehicle, 2-cluster, K=3, L=3 instance and its matrices."""
    s = scenario_from_lists([[1, 2, 3], [1, 2, 4]], [1e6] * 4, 0.0)
    intra, hop = intra_cluster_pairs(s), one_hop_pairs(s)
    g_plus, g_minus = build_G(intra, s.N)
    q_plus, q_minus = build_Q(3)
    h_plus, h_minus = build_H(hop, s.N)
    return {
        "intra_pairs": [p.as_tuple() for p in intra],
        "hop_pairs": [p.as_tuple() for p in hop],
        "G_minus": g_minus, "G_plus": g_plus,
        "Q_minus": q_minus, "Q_plus": q_plus, "Q": q_minus.T @ q_plus,
        "H_minus": h_minus, "H_plus": h_plus,
    }


def cmd_example(args) -> int:
    ex = worked_example()
    print("clusters: {1,2,3} and {1,2,4}; K=3, L=3")
    print(f"intra-cluster pairs (P={len(ex['intra_pairs'])}): {ex['intra_pairs']}")
    print(f"one-hop pairs (U={len(ex['hop_pairs'])}): {ex['hop_pairs']}")
    for name in ("G_minus", "G_plus", "Q_minus", "Q_plus", "Q", "H_minus", "H_plus"):
        print(f"\n{name} =")
        m = ex[name]
        if m.size == 0:
            print(f"  (empty, shape {m.shape})")
        for row in m:
            print("  " + " ".join(str(int(v)) for v in row))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "solve": cmd_solve, "audit": cmd_audit, "example": cmd_example}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeMismatch, FileNotFoundError, IsADirectoryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
