"""Command line: ``moments``, ``reconstruct`` and ``run``.

Exit codes: 0 success (for ``run``: the last phase converged), 2 the run hit
its iteration cap without converging, 1 bad usage or invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_scenario, save_scenario
from .controller import write_gain_csv
from .fileio import (
    PGMError,
    load_density,
    read_moments_csv,
    write_grid_csv,
    write_moments_csv,
    write_pgm,
    write_positions_csv,
)
from .moments import MomentBasis, moments_of_grid, msre, reconstruct
from .swarmsim import run

EXIT_OK, EXIT_USAGE, EXIT_CAP = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_moments(args) -> int:
    basis = MomentBasis(args.basis, args.order)
    grid = load_density(args.image, invert=args.invert)
    M = moments_of_grid(basis, grid)
    out = Path(args.out) if args.out else _out_dir(args.out_dir) / "moments.csv"
    write_moments_csv(M, out)
    print(f"{basis.complex_count} complex moments ({basis.size} real components) -> {out}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    M = read_moments_csv(args.moments)
    grid = reconstruct(M, (args.resolution, args.resolution))
    out = _out_dir(args.out_dir)
    write_pgm(out / "reconstruction.pgm", grid)
    write_grid_csv(grid, out / "reconstruction.csv")
    print(f"reconstruction ({args.resolution}x{args.resolution}) -> {out}")
    if args.reference:
        ref = read_moments_csv(args.reference)
        if ref.basis != M.basis:
            raise ValueError(f"reference moments are {ref.basis}, reconstruction uses {M.basis}")
        print(f"msre {msre(M, ref):.6g}")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, base_dir = load_scenario(args.config)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.trace_robot is not None:
        scenario.trace_robot = args.trace_robot
    out = _out_dir(args.out_dir)
    save_scenario(scenario, out / "scenario.json")

    snaps = _out_dir(out / "snapshots") if args.snapshot_every else None

    def snapshot(state):
        if snaps is not None and state.t % args.snapshot_every == 0:
            write_positions_csv(state.ids, state.live_positions(), snaps / f"positions_{state.t:07d}.csv")
            write_pgm(snaps / f"reconstruction_{state.t:07d}.pgm", reconstruct(state.true_moments()))

    result = run(scenario, base_dir=base_dir, callback=snapshot)
    state = result.state
    result.log.write_csv(out / "metrics.csv")
    write_positions_csv(state.ids, state.live_positions(), out / "final_positions.csv")
    write_gain_csv(state.gain, out / "gain.csv")
    if state.target is not None:
        write_moments_csv(state.target, out / "target_moments.csv")
    write_moments_csv(state.true_moments(), out / "final_moments.csv")

    phases = ", ".join(str(t) for t in result.converged_at) or "none"
    print(f"{scenario.name}: {state.t} iterations, {state.n_alive} robots, converged at: {phases}")
    if state.target is not None:
        print(f"final moment error {state.history['moment_error'][-1]:.6g}, "
              f"msre {state.history['msre'][-1]:.6g}")
    print(f"outputs -> {out}")
    return EXIT_OK if result.converged else EXIT_CAP


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swarmmoments", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("moments", help="moments of a PGM image")
    p.add_argument("image")
    p.add_argument("--basis", default="legendre", help="legendre (lm) or pzm")
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--invert", action="store_true", help="dark pixels carry the mass")
    p.add_argument("--out", help="output CSV (default: <out-dir>/moments.csv)")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("reconstruct", help="truncated-series image from a moment CSV")
    p.add_argument("moments")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--reference", help="moment CSV to report the MSRE against")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("run", help="simulate a JSON scenario")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--trace-robot", type=int, metavar="ID")
    p.add_argument("--snapshot-every", type=int, metavar="K", default=0,
                   help="write positions and a reconstruction PGM every K iterations")
    p.add_argument("--out-dir", default="run_out")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "snapshot_every", 0) < 0:
        parser.error("--snapshot-every must be >= 0")
    try:
        return args.func(args)
    except (ConfigError, PGMError, ValueError, OSError) as exc:
        print(f"swarmmoments {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
