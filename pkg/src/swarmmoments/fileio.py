"""PGM images, moment CSVs, grid CSVs and position CSVs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .moments import BasisKind, DensityGrid, MomentBasis, MomentVector

__all__ = [
    "PGMError",
    "read_pgm",
    "write_pgm",
    "load_density",
    "write_moments_csv",
    "read_moments_csv",
    "write_grid_csv",
    "read_grid_csv",
    "write_positions_csv",
    "read_positions_csv",
]


class PGMError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int = 0):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError("truncated PGM header")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        out.append(data[start:pos])
    return out, pos


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return ``(pixels, maxval)``; ``pixels`` has the top image row first."""
    data = Path(path).read_bytes()
    (magic, width, height, maxval), pos = _tokens(data, 4)
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise PGMError("malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise PGMError(f"bad PGM dimensions or maxval ({width}x{height}, {maxval})")
    if magic == b"P2":
        body = data[pos:].split()
        if len(body) < width * height:
            raise PGMError("not enough pixel values in P2 image")
        pixels = np.array([int(t) for t in body[: width * height]], dtype=np.int64)
    elif magic == b"P5":
        # exactly one whitespace byte separates the header from the raster
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = width * height * dtype.itemsize
        raster = data[pos : pos + need]
        if len(raster) < need:
            raise PGMError("truncated P5 raster")
        pixels = np.frombuffer(raster, dtype=dtype).astype(np.int64)
    else:
        raise PGMError(f"unsupported image type {magic!r}; expected P2 or P5")
    if pixels.max(initial=0) > maxval:
        raise PGMError("pixel value exceeds maxval")
    return pixels.reshape(height, width), maxval


def write_pgm(path, grid: DensityGrid | np.ndarray, maxval: int = 255):
    """Write a binary PGM, min-max scaled to ``0..maxval``."""
    values = grid.values if isinstance(grid, DensityGrid) else np.asarray(grid, dtype=float)
    img = np.flipud(values)
    lo, hi = float(img.min()), float(img.max())
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    raster = np.rint(scaled * maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + raster.astype(dtype).tobytes())


def load_density(path, invert: bool = False) -> DensityGrid:
    """Image -> density grid with masses in ``[0, 1]``.

    Without ``invert`` bright pixels are dense; with it dark pixels are, so
    a dark shape on a white background becomes the mass.
    """
    pixels, maxval = read_pgm(path)
    mass = pixels.astype(float) / maxval
    if invert:
        mass = 1.0 - mass
    return DensityGrid(np.flipud(mass))


def write_moments_csv(M: MomentVector, path):
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# basis={M.basis.kind.value} order={M.basis.order}\n")
        writer = csv.writer(fh)
        writer.writerow(["p", "q", "part", "value"])
        for (p, q, part), value in zip(M.basis.index, M.values):
            writer.writerow([p, q, part, repr(float(value))])


def read_moments_csv(path) -> MomentVector:
    lines = Path(path).read_text().splitlines()
    kind = None
    order = None
    body = []
    for line in lines:
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                if key == "basis":
                    kind = BasisKind.parse(value)
                elif key == "order":
                    order = int(value)
        elif line.strip():
            body.append(line)
    rows = list(csv.DictReader(body))
    if not rows or set(rows[0]) != {"p", "q", "part", "value"}:
        raise ValueError(f"{path}: expected header p,q,part,value")
    keys = [(int(r["p"]), int(r["q"]), r["part"]) for r in rows]
    if kind is None:
        kind = BasisKind.PSEUDO_ZERNIKE if any(k[2] == "Im" for k in keys) else BasisKind.LEGENDRE
    if order is None:
        order = max(p if kind is BasisKind.PSEUDO_ZERNIKE else p + q for p, q, _ in keys)
    basis = MomentBasis(kind, order)
    if tuple(keys) != basis.index:
        raise ValueError(f"{path}: rows do not match the {basis} component layout")
    return MomentVector(basis, [float(r["value"]) for r in rows])


def write_grid_csv(grid: DensityGrid, path):
    """Raw grid values, top image row first (same orientation as the PGM)."""
    np.savetxt(path, np.flipud(grid.values), delimiter=",", fmt="%.17g")


def read_grid_csv(path) -> DensityGrid:
    return DensityGrid(np.flipud(np.loadtxt(path, delimiter=",", ndmin=2)))


def write_positions_csv(ids, positions, path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y"])
        for i, (x, y) in zip(ids, positions):
            writer.writerow([int(i), repr(float(x)), repr(float(y))])


def read_positions_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(int), data[:, 1:3]
