"""How well truncated moment series reproduce the letter N as the order grows.

The error is relative to the image with its mean removed, since the series
carries no zeroth-order term.
"""

from pathlib import Path

import numpy as np

from swarmmoments.fileio import write_pgm
from swarmmoments.moments import MomentBasis, moments_of_grid, reconstruct
from swarmmoments.shapes import render


def main(orders=(5, 10, 15, 20), out=Path("reconstruction_orders")):
    out.mkdir(exist_ok=True)
    image = render("letter_n", 128)
    ref = image.values / image.values.sum() / image.pixel_area
    ref = ref - ref.mean()
    for n in orders:
        basis = MomentBasis("legendre", n)
        grid = reconstruct(moments_of_grid(basis, image), ref.shape)
        err = float(np.sum((grid.values - ref) ** 2) / np.sum(ref**2))
        write_pgm(out / f"letter_n_lm{n:02d}.pgm", grid)
        print(f"order {n:2d}: {basis.complex_count:3d} moments, relative squared error {err:.3f}")
    print(f"-> {out}")


if __name__ == "__main__":
    main()
