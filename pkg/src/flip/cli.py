"""Unified command line for the workbench.

Subcommands mirror the service endpoints: calibrate a noise multiplier,
preview a partition, simulate a federation from a config file,
recommend parameters from requirements, and serve the HTTP API. Usage
mistakes exit 2 through argparse; domain failures (an unreachable
target, a client crash) report to stderr and exit 1.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .accounting import (
    AccountingError,
    CalibrationError,
    FixedSizeScheme,
    PrivacyTarget,
    calibrate_sigma,
)
from .launch import (
    RunEventStream,
    execute_plan,
    plain,
    plan_from_dict,
    scheme_from_args,
    steps_from_args,
)
from .partition import PartitionError, Policy, partition_sizes
from .practitioner import (
    FIXED_SIZE_ORDERS,
    GoalKind,
    PrivacyGoal,
    Requirements,
    load_goal_table,
    recommend,
)

EMIT_CHOICES = ("text", "json", "csv")


def _print_csv(header, rows):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _cmd_calibrate(args, parser):
    try:
        scheme = scheme_from_args(
            args.scheme, rate=args.rate, batch_size=args.batch_size,
            dataset_size=args.dataset_size, adjacency=args.adjacency,
        )
        steps = steps_from_args(
            steps=args.steps, rounds=args.rounds,
            batch_size=args.batch_size, dataset_size=args.dataset_size,
            local_epochs=args.local_epochs,
        )
    except ValueError as exc:
        parser.error(str(exc))
    orders = FIXED_SIZE_ORDERS if isinstance(scheme, FixedSizeScheme) else None
    try:
        result = calibrate_sigma(
            PrivacyTarget(args.epsilon, args.delta), scheme, steps,
            orders=orders,
        )
    except AccountingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {
        "sigma": float(result.sigma),
        "achieved_epsilon": float(result.achieved_epsilon),
        "best_order": float(result.best_order),
        "steps": int(result.steps),
    }
    if args.emit == "json":
        print(json.dumps(payload, sort_keys=True))
    elif args.emit == "csv":
        header = ["sigma", "achieved_epsilon", "best_order", "steps"]
        _print_csv(header, [[payload[k] for k in header]])
    else:
        print(
            f"sigma {payload['sigma']:.6g} "
            f"(epsilon {payload['achieved_epsilon']:.6g} "
            f"at order {payload['best_order']:g} over {steps} steps)"
        )
    return 0


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------

def _cmd_partition(args, parser):
    try:
        sizes = partition_sizes(args.n, args.clients, Policy.parse(args.policy))
    except (PartitionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.emit == "json":
        print(json.dumps({"sizes": list(sizes)}))
    elif args.emit == "csv":
        _print_csv(["client_id", "size"], list(enumerate(sizes)))
    else:
        print(" ".join(str(size) for size in sizes))
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args, parser):
    path = Path(args.config)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        parser.error(f"cannot read config {args.config!r}: {exc}")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        parser.error(f"config {args.config!r} is not valid JSON: {exc}")
    try:
        plan = plan_from_dict(payload)
    except (ValueError, TypeError) as exc:
        parser.error(f"bad run config: {exc}")

    def sink(event):
        print(json.dumps(event, sort_keys=True), flush=True)

    stream = RunEventStream(plan, sink)
    try:
        record = execute_plan(plan, on_round=stream.on_round)
        status, diagnostic = record.status, record.diagnostic
    except Exception as exc:
        status, diagnostic = "aborted", str(exc)
    stream.finish(status, diagnostic)

    if args.report is not None:
        from . import report

        paths = report.write_report(args.report, stream.rounds)
        print("report written to " + str(Path(args.report).resolve()),
              file=sys.stderr)
        del paths
    if status != "done":
        print(f"error: {diagnostic}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# recommend
# ---------------------------------------------------------------------------

_GOAL_NAMES = {
    "mia": GoalKind.MITIGATE_MIA,
    "reconstruction": GoalKind.MITIGATE_RECONSTRUCTION,
    "regulatory": GoalKind.REGULATORY,
}


def _cmd_recommend(args, parser):
    kind = _GOAL_NAMES[args.goal]
    if kind is GoalKind.REGULATORY and args.epsilon is None:
        parser.error("--goal regulatory needs --epsilon")
    if kind is not GoalKind.REGULATORY and args.epsilon is not None:
        parser.error("--epsilon only applies to --goal regulatory")
    table = None
    if args.goal_table is not None:
        try:
            table = load_goal_table(args.goal_table)
        except (OSError, ValueError) as exc:
            parser.error(f"bad goal table: {exc}")
    try:
        requirements = Requirements(
            goal=PrivacyGoal(kind, args.epsilon),
            clients=args.clients,
            dataset_size=args.dataset_size,
            rounds=args.rounds,
            memory_budget=(math.inf if args.memory_budget is None
                           else args.memory_budget),
            model_units=args.model_units,
            min_accuracy=args.min_accuracy,
            policy_hint=(None if args.policy is None
                         else Policy.parse(args.policy)),
            local_epochs=args.local_epochs,
            preferred_accountant=args.prefer,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        rec = recommend(requirements, goal_table=table)
    except (CalibrationError, PartitionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.emit == "json":
        print(json.dumps(plain(asdict(rec)), sort_keys=True))
    elif args.emit == "csv":
        header = ["client", "partition_size", "delta", "sigma", "steps"]
        rows = [
            [i, n, d, s, t]
            for i, (n, d, s, t) in enumerate(
                zip(rec.partition_sizes, rec.deltas, rec.sigmas,
                    rec.steps_per_client)
            )
        ]
        _print_csv(header, rows)
    else:
        print(f"epsilon {rec.epsilon:g}")
        print(f"accountant {rec.accountant}")
        print(f"batch_size {rec.batch_size}")
        if rec.overrun_probability is not None:
            print(f"overrun_probability {rec.overrun_probability:.3g}")
        for i, (n, d, s, t) in enumerate(
            zip(rec.partition_sizes, rec.deltas, rec.sigmas,
                rec.steps_per_client)
        ):
            print(f"client {i}: size {n} delta {d:.3g} sigma {s:.6g} "
                  f"steps {t}")
        for line in rec.rationale:
            print(f"# {line}")
    return 0


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------

def _cmd_serve(args, parser):
    from .service import serve

    try:
        serve(address=args.addr, store_path=args.store)
    except ValueError as exc:
        parser.error(str(exc))
    except KeyboardInterrupt:
        pass
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flip",
        description="federated learning workbench with differential privacy",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate",
                         help="find the noise multiplier for a target")
    cal.add_argument("--epsilon", type=float, required=True)
    cal.add_argument("--delta", type=float, required=True)
    cal.add_argument("--scheme", choices=("poisson", "fixed", "fixed-size"),
                     default="poisson")
    cal.add_argument("--rate", type=float,
                     help="poisson sampling rate (or use --batch with "
                          "--dataset-size)")
    cal.add_argument("--batch", type=int, dest="batch_size")
    cal.add_argument("--dataset-size", type=int)
    cal.add_argument("--steps", type=int,
                     help="total accounted steps (or use --rounds)")
    cal.add_argument("--rounds", type=int)
    cal.add_argument("--local-epochs", type=int, default=1)
    cal.add_argument("--adjacency", choices=("add-remove", "replace-one"))
    cal.add_argument("--emit", choices=EMIT_CHOICES, default="text")
    cal.set_defaults(func=_cmd_calibrate)

    part = sub.add_parser("partition", help="preview client shard sizes")
    part.add_argument("--n", type=int, required=True)
    part.add_argument("--clients", type=int, required=True)
    part.add_argument("--policy",
                      choices=("iid", "linear", "square", "exponential"),
                      required=True)
    part.add_argument("--seed", type=int, default=0,
                      help="only affects index assignment in the library; "
                           "sizes are seed-free")
    part.add_argument("--emit", choices=EMIT_CHOICES, default="text")
    part.set_defaults(func=_cmd_partition)

    sim = sub.add_parser("simulate",
                         help="run a federation from a JSON config")
    sim.add_argument("--config", required=True,
                     help="path to the run config (JSON)")
    sim.add_argument("--report",
                     help="directory for summary.csv and figures")
    sim.set_defaults(func=_cmd_simulate)

    rec = sub.add_parser("recommend",
                         help="turn requirements into run parameters")
    rec.add_argument("--goal", choices=tuple(_GOAL_NAMES), required=True)
    rec.add_argument("--epsilon", type=float,
                     help="target epsilon, for --goal regulatory")
    rec.add_argument("--clients", type=int, required=True)
    rec.add_argument("--dataset-size", type=int, required=True)
    rec.add_argument("--rounds", type=int, required=True)
    rec.add_argument("--model-units", type=int, required=True)
    rec.add_argument("--memory-budget", type=float,
                     help="abstract units per client; omit for unlimited")
    rec.add_argument("--min-accuracy", type=float)
    rec.add_argument("--policy",
                     choices=("iid", "linear", "square", "exponential"))
    rec.add_argument("--local-epochs", type=int, default=1)
    rec.add_argument("--prefer", choices=("poisson", "fixed-size"),
                     default="poisson")
    rec.add_argument("--goal-table",
                     help="JSON file overriding the goal-to-epsilon table")
    rec.add_argument("--emit", choices=EMIT_CHOICES, default="text")
    rec.set_defaults(func=_cmd_recommend)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--addr", help="host:port (default FLIP_ADDR or "
                                    "127.0.0.1:8800)")
    srv.add_argument("--store", help="run registry directory "
                                     "(default FLIP_STORE or ./flip_store)")
    srv.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    raise SystemExit(main())
