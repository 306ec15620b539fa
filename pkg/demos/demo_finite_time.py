"""Finite-time reachability against the closed-form reach time.

A single integrator on a line runs toward the halfplane x <= 0 under one
finite-time barrier row with forcing gamma sign(h) |h|^rho. Separating
variables in hdot = gamma |h|^rho gives the exact reach time

    T = |h0|^(1 - rho) / (gamma (1 - rho)),

so each parameter set below has a hard prediction to hit. The script runs
three (gamma, rho) pairs from different starts, prints measured against
predicted times, and plots the h(t) traces with the predictions marked.
"""

import argparse
import dataclasses
from pathlib import Path

from cbfseq import FcbfParams, bundled_scenario_path, load_scenario, run

CASES = [
    (FcbfParams(gamma=1.0, rho=0.5), 1.0),
    (FcbfParams(gamma=2.0, rho=0.0), 3.0),
    (FcbfParams(gamma=0.5, rho=0.8), 0.5),
]


def _plot(traces, path: Path) -> None:
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    fig = Figure(figsize=(7.0, 4.0))
    FigureCanvasSVG(fig)
    ax = fig.subplots()
    for label, t, h, predicted in traces:
        (line,) = ax.plot(t, h, lw=1.3, label=label)
        ax.axvline(predicted, color=line.get_color(), ls="--", lw=0.8)
    ax.axhline(0.0, color="0.4", lw=0.8)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("h(x(t))")
    ax.legend(loc="lower right", fontsize=9)
    ax.set_title("finite-time reach, dashed = closed-form prediction")
    fig.tight_layout()
    fig.savefig(path, format="svg")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_output/finite_time")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    base = load_scenario(bundled_scenario_path("fcbf_line"))
    print(f"{'gamma':>6} {'rho':>5} {'h0':>6} {'measured':>9} {'predicted':>10} {'error':>7}")
    traces = []
    for params, x0 in CASES:
        sc = dataclasses.replace(base, fcbf=params, initial_state=(x0, 0.0))
        log = run(sc, mode="discrete")
        predicted = x0 ** (1.0 - params.rho) / (params.gamma * (1.0 - params.rho))
        measured = log.arrivals[0]["t"]
        err = (measured - predicted) / predicted
        print(
            f"{params.gamma:>6.2f} {params.rho:>5.2f} {-x0:>6.2f} "
            f"{measured:>9.4f} {predicted:>10.4f} {err:>+7.2%}"
        )
        label = f"gamma={params.gamma:g}, rho={params.rho:g}"
        traces.append((label, log.t, log.h[:, 0], predicted))

    svg = out / "finite_time_reach.svg"
    _plot(traces, svg)
    print(f"h(t) traces in {svg}")


if __name__ == "__main__":
    main()
