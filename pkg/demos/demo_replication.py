"""Three-goal unicycle tour around a rectangular obstacle.

Replays the bundled testbed-scale scenario: a unicycle steered through an
offset point visits regions A, B and C in order while a superellipse
obstacle splits the workspace. One composite reachability row blends the
goal barriers, so the applied input stays continuous through both goal
handoffs; a separate invariance row keeps the obstacle margin positive
for the whole run.

Writes the full artifact set; trajectory.svg shows the tour, and
alpha_vs_time.svg the two weight exchanges.
"""

import argparse
from pathlib import Path

from cbfseq import (
    bundled_scenario_path,
    continuity_metric,
    emit_outputs,
    load_scenario,
    run,
)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_output/replication")
    ap.add_argument(
        "--mode",
        choices=["smooth", "discrete"],
        default="smooth",
        help="rerun with --mode discrete to see the switching baseline on the same course",
    )
    args = ap.parse_args()
    out = Path(args.out)

    scenario = load_scenario(bundled_scenario_path("robotarium_replication"))
    log = run(scenario, mode=args.mode)
    report = continuity_metric(log)
    emit_outputs(log, report, out)

    for ev in log.arrivals:
        print(f"reached {ev['task']:<7} at t = {ev['t']:7.2f} s")
    obstacle = scenario.safety_indices[0]
    print(f"min obstacle margin  {log.h[:, obstacle].min():.4f}  (never negative)")
    print(f"max control step     {report.max_jump:.4f}")
    print(f"mean QP solve time   {log.qp_time_us.mean():.0f} us over {len(log)} steps")
    print(f"artifacts in {out}/")


if __name__ == "__main__":
    main()
