"""Coupled seven-robot swarm under gain G and 5G; writes both error traces."""

import csv
from pathlib import Path

from swarmmoments.config import load_scenario
from swarmmoments.swarmsim import run

ROOT = Path(__file__).resolve().parent.parent


def main(out="control_gain_study.csv"):
    traces = {}
    for name in ("gammaG", "gamma5G"):
        scenario, base = load_scenario(ROOT / "configs" / f"coupled_n7_{name}.json")
        scenario.stop_on_convergence = False
        err = run(scenario, base_dir=base).state.history["moment_error"]
        traces[name] = err
        print(f"{name}: initial {err[0]:.4f}, final {err[-1]:.4f} ({err[-1] / err[0]:.3g}x)")
    with open(out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", *traces])
        writer.writerows([t, *vals] for t, vals in enumerate(zip(*traces.values())))
    print(f"-> {out}")


if __name__ == "__main__":
    main()
