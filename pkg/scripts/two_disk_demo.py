"""Thirty robots on a two-disk target whose left disk is twice as dense."""

import argparse
from pathlib import Path

import numpy as np

from swarmmoments.config import load_scenario
from swarmmoments.fileio import write_positions_csv
from swarmmoments.swarmsim import run

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    args = ap.parse_args()
    scenario, base = load_scenario(ROOT / "configs" / "two_disk_pzm.json")
    reach = 0.3 + scenario.control.r3
    for seed in args.seeds:
        scenario.seed = seed
        state = run(scenario, base_dir=base).state
        pts = state.live_positions()
        left = int(np.sum(np.hypot(pts[:, 0] + 0.42, pts[:, 1]) <= reach))
        right = int(np.sum(np.hypot(pts[:, 0] - 0.42, pts[:, 1]) <= reach))
        print(f"seed {seed}: dense {left}, light {right}, elsewhere {len(pts) - left - right}, "
              f"moment error {state.history['moment_error'][-1]:.3f}")
        write_positions_csv(state.ids, pts, Path(f"two_disk_seed{seed}.csv"))


if __name__ == "__main__":
    main()
