"""Estimation time to convergence with and without message memory under loss.

Runs the two estimation configs over a range of seeds and writes one row per
trial. A trial that reaches the iteration cap is reported as ``capped``.

    python3 scripts/packet_loss_study.py --seeds 10 --cap 500000
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from swarmmoments.config import load_scenario
from swarmmoments.swarmsim import run

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--cap", type=int, default=500_000)
    ap.add_argument("--drop-rate", type=float, default=None, help="override the configs' loss rate")
    ap.add_argument("--out", default="packet_loss_study.csv")
    args = ap.parse_args()

    rows = []
    for memory in (True, False):
        name = "memory" if memory else "nomemory"
        scenario, base = load_scenario(ROOT / "configs" / f"estimation_loss30_{name}.json")
        scenario.iterations = args.cap
        if args.drop_rate is not None:
            scenario.drop_rate = args.drop_rate
        times = []
        for seed in range(args.seeds):
            scenario.seed = seed
            result = run(scenario, base_dir=base)
            t = result.converged_at[0] if result.converged else None
            times.append(args.cap if t is None else t)
            rows.append({"memory": memory, "seed": seed, "converged_at": t if t is not None else "capped",
                         "final_estimate_error": result.state.history["estimate_error_max"][-1]})
            print(f"{name:9s} seed {seed}: {rows[-1]['converged_at']}")
        print(f"{name:9s} median {np.median(times):g}")

    with open(args.out, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"-> {args.out}")


if __name__ == "__main__":
    main()
