"""Command-line front end.

Subcommands:

* ``overlay``   -- build a committee tree and print it as JSON
* ``size``      -- solve for the minimal committee size at a failure budget
* ``analyze``   -- run a named analysis preset; writes CSV + figure
* ``simulate``  -- run a scenario, check the trace, optionally save/replay it

Every command is deterministic for fixed arguments, and exits non-zero when
a self-check or trace check fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import SizingParams, committee_size_solver, committee_size_upper_bound
from .errors import InvalidInputError, NotFoundError
from .overlay import OverlayParams, form_overlay
from .presets import ANALYSIS_PRESETS, analysis_preset_rows
from .report import write_report
from .sim import BEHAVIOR_KINDS, Scenario, Trace, check_trace, replay, run


def _parse_seed(text: str) -> bytes:
    """Accept a hex string or a decimal integer and return seed bytes."""
    try:
        return bytes.fromhex(text)
    except ValueError:
        pass
    try:
        return int(text).to_bytes(8, "big")
    except (ValueError, OverflowError):
        raise InvalidInputError(f"seed must be hex or a small decimal int: {text!r}")


def cmd_overlay(args) -> int:
    tree = form_overlay(
        list(range(args.nodes)),
        OverlayParams(n=args.committee_size, xi=_parse_seed(args.seed)),
    )
    print(tree.to_json())
    return 0


def cmd_size(args) -> int:
    params = SizingParams(
        n_total=args.nodes,
        delta=args.failure_budget,
        a=args.adversary_fraction,
        p=args.sample_fraction,
    )
    res = committee_size_solver(params)
    cap = committee_size_upper_bound(
        SizingParams(
            n_total=args.nodes,
            delta=args.failure_budget,
            a=args.adversary_fraction,
            p=args.sample_fraction,
            n_min=res["n"],
        )
    )
    res["n_upper_bound"] = cap
    print(json.dumps(res))
    return 0


def cmd_analyze(args) -> int:
    rows, checks = analysis_preset_rows(args.preset)
    paths = write_report(args.preset, rows, args.out, plot=not args.no_plot)
    print(json.dumps({"preset": args.preset, "rows": len(rows), **paths, "checks": checks}))
    return 0 if checks.get("ok", True) else 1


def _scenario_from_args(args) -> Scenario:
    if args.scenario:
        doc = json.loads(Path(args.scenario).read_text())
        return Scenario.from_dict(doc)
    kwargs = dict(
        n_nodes=args.nodes,
        committee_size=args.committee_size,
        adversary_count=args.adversaries,
        behavior=args.behavior,
        views_to_run=args.views,
        view_timeout=args.view_timeout,
        delta=args.delta,
        gst=args.gst,
        master_seed=args.seed,
    )
    if args.adversary_fraction is not None:
        kwargs["adversary_fraction"] = args.adversary_fraction
    return Scenario(**kwargs)


def cmd_simulate(args) -> int:
    if args.replay:
        trace = Trace.from_jsonl(Path(args.replay).read_text())
        res = replay(trace)
        print(json.dumps(res))
        return 0 if res["identical"] else 1
    scenario = _scenario_from_args(args)
    trace = run(scenario)
    report = check_trace(trace)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(trace.to_jsonl())
        report["trace"] = str(out)
    summary = {
        "ok": report["ok"],
        "violations": report["violations"],
        "max_honest_view": trace.stats["max_honest_view"],
        "commits_total": trace.stats["commits_total"],
        "qcs": trace.stats["qcs"],
        "timeouts": trace.stats["timeouts"],
        "stalled": trace.stats["stalled"],
        "truncated": trace.truncated,
        "events": trace.stats["events_processed"],
    }
    if args.out:
        summary["trace"] = str(args.out)
    print(json.dumps(summary))
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carnot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("overlay", help="build a committee tree, print JSON")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--committee-size", type=int, required=True)
    p.add_argument("--seed", default="00", help="hex string or decimal int")
    p.set_defaults(fn=cmd_overlay)

    p = sub.add_parser("size", help="minimal committee size for a failure budget")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--failure-budget", type=float, required=True)
    p.add_argument("--adversary-fraction", type=float, default=1 / 3)
    p.add_argument("--sample-fraction", type=float, default=1 / 4)
    p.set_defaults(fn=cmd_size)

    p = sub.add_parser("analyze", help="run an analysis preset, write CSV + figure")
    p.add_argument("preset", choices=ANALYSIS_PRESETS)
    p.add_argument("--out", default="reports", help="output directory")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("simulate", help="run a scenario and check the trace")
    p.add_argument("--scenario", help="JSON file with a full scenario document")
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--committee-size", type=int, default=3)
    p.add_argument("--adversaries", type=int, default=0)
    p.add_argument("--adversary-fraction", type=float, default=None)
    p.add_argument("--behavior", choices=BEHAVIOR_KINDS, default="silent")
    p.add_argument("--views", type=int, default=20)
    p.add_argument("--view-timeout", type=int, default=80)
    p.add_argument("--delta", type=int, default=10)
    p.add_argument("--gst", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the trace as JSON lines")
    p.add_argument("--replay", help="re-run a saved trace and compare byte-for-byte")
    p.set_defaults(fn=cmd_simulate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InvalidInputError, NotFoundError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
