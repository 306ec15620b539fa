"""Command-line front end: run one scenario and write its artifacts.

Exit codes: 0 when every task completed, 2 when the QP became infeasible
mid-run, 3 when t_max elapsed with tasks remaining. Scenario files that
fail to load or validate exit with 1.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .harness import (
    ScenarioError,
    bundled_scenario_names,
    bundled_scenario_path,
    continuity_metric,
    emit_outputs,
    load_scenario,
    run,
)
from .qp import Infeasible

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INCOMPLETE = 3


def _resolve(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    return bundled_scenario_path(name)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cbfseq",
        description="Sequential reach-avoid control with barrier-function QPs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="simulate a scenario and write CSV/JSON/SVG outputs")
    runp.add_argument(
        "scenario",
        help="scenario JSON path, or one of the bundled names: "
        + ", ".join(bundled_scenario_names()),
    )
    runp.add_argument(
        "--mode",
        choices=["smooth", "discrete"],
        default="smooth",
        help="smooth composite controller or the switching baseline (default: smooth)",
    )
    runp.add_argument("--dt", type=float, default=None, help="override the step size")
    runp.add_argument("--tmax", type=float, default=None, help="override the time limit")
    runp.add_argument("--out", default=None, help="output directory (default: <name>_<mode>)")
    runp.add_argument(
        "--active-only-softmin",
        action="store_true",
        help="restrict the composite softmin to barriers with positive weight",
    )
    runp.add_argument(
        "--slack-on-infeasible",
        action="store_true",
        help="relax reachability rows (never safety) when the QP is infeasible",
    )
    runp.add_argument(
        "--timing-in-csv",
        action="store_true",
        help="write measured solve times into the CSV qp_us column; off by "
        "default so repeated runs stay byte-identical",
    )
    args = parser.parse_args(argv)

    try:
        scenario = load_scenario(_resolve(args.scenario))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.tmax is not None:
        overrides["t_max"] = args.tmax
    if args.active_only_softmin:
        overrides["softmin_active_only"] = True
    if args.slack_on_infeasible:
        overrides["slack_on_infeasible"] = True
    if overrides:
        try:
            scenario = dataclasses.replace(scenario, **overrides)
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1

    out_dir = Path(args.out) if args.out else Path(f"{scenario.name}_{args.mode}")
    try:
        log = run(scenario, args.mode)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        partial = exc.context.get("log")
        if partial is not None:
            emit_outputs(partial, continuity_metric(partial), out_dir, args.timing_in_csv)
            print(f"partial log written to {out_dir}", file=sys.stderr)
        return EXIT_INFEASIBLE

    report = continuity_metric(log)
    emit_outputs(log, report, out_dir, args.timing_in_csv)
    for ev in log.arrivals:
        print(f"arrived at {ev['task']} (task {ev['task_index'] + 1}) at t = {ev['t']:.3f} s")
    print(f"max control jump {report.max_jump:.6g}; outputs in {out_dir}/")
    if not log.completed:
        print(f"stopped at t_max = {scenario.t_max:g} s with tasks remaining", file=sys.stderr)
        return EXIT_INCOMPLETE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
