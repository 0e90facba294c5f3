"""Built-in target densities: bunny head, two disks, letter N."""

from __future__ import annotations

import numpy as np

from .moments import DensityGrid

__all__ = ["SHAPES", "bunny_head", "two_disks", "letter_n", "uniform", "render"]


def _mesh(resolution: int):
    grid = DensityGrid(np.zeros((resolution, resolution)))
    return np.meshgrid(grid.x, grid.y)


def _ellipse(x, y, cx, cy, a, b, tilt):
    c, s = np.cos(tilt), np.sin(tilt)
    u = (x - cx) * c + (y - cy) * s
    w = -(x - cx) * s + (y - cy) * c
    return (u / a) ** 2 + (w / b) ** 2 <= 1.0


def bunny_head(resolution: int = 128) -> DensityGrid:
    """Uniform-density silhouette: round head with two upright ears."""
    x, y = _mesh(resolution)
    head = (x**2 + (y + 0.25) ** 2) <= 0.46**2
    left = _ellipse(x, y, -0.25, 0.4, 0.14, 0.36, np.deg2rad(-14))
    right = _ellipse(x, y, 0.25, 0.4, 0.14, 0.36, np.deg2rad(14))
    return DensityGrid((head | left | right).astype(float))


def two_disks(resolution: int = 128) -> DensityGrid:
    """Two equal disks side by side; the left one is twice as dense."""
    x, y = _mesh(resolution)
    values = np.zeros_like(x)
    values[((x + 0.42) ** 2 + y**2) <= 0.3**2] = 2.0
    values[((x - 0.42) ** 2 + y**2) <= 0.3**2] = 1.0
    return DensityGrid(values)


def letter_n(resolution: int = 128) -> DensityGrid:
    x, y = _mesh(resolution)
    tall = np.abs(y) <= 0.7
    left = tall & (np.abs(x + 0.45) <= 0.12)
    right = tall & (np.abs(x - 0.45) <= 0.12)
    # diagonal from top-left to bottom-right
    diag = tall & (np.abs(x + y * (0.45 / 0.7)) <= 0.14) & (np.abs(x) <= 0.57)
    return DensityGrid((left | right | diag).astype(float))


def uniform(resolution: int = 64) -> DensityGrid:
    return DensityGrid(np.ones((resolution, resolution)))


SHAPES = {
    "bunny": bunny_head,
    "two_disks": two_disks,
    "letter_n": letter_n,
    "uniform": uniform,
}


def render(name: str, resolution: int = 128) -> DensityGrid:
    try:
        return SHAPES[name](resolution)
    except KeyError:
        raise ValueError(f"unknown shape {name!r}; choose from {sorted(SHAPES)}") from None
