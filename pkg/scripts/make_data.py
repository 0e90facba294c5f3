"""Write the bundled target images to data/.

The bunny and the letter N are dark shapes on a white background (load them
with ``--invert``); the two-disk image stores density as brightness.
"""

from pathlib import Path

from swarmmoments.fileio import write_pgm
from swarmmoments.shapes import render

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    DATA.mkdir(exist_ok=True)
    for name in ("bunny", "letter_n"):
        grid = render(name, 128)
        write_pgm(DATA / f"{name}.pgm", 1.0 - grid.values)
    # maxval 2 keeps the 2:1 density ratio exact: pixels are 0, 1 or 2
    write_pgm(DATA / "two_disks.pgm", render("two_disks", 128), maxval=2)
    for path in sorted(DATA.glob("*.pgm")):
        print(path)


if __name__ == "__main__":
    main()
