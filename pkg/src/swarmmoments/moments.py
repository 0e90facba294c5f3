"""Legendre and pseudo-Zernike image moments of grids and point sets.

Every moment vector is stored in a real embedding. Legendre moments are real
already. A pseudo-Zernike moment with repetition ``q > 0`` is complex and
occupies two slots (real part, then imaginary part); ``q = 0`` moments are
real and occupy one.

Swarm moments use the *mean* convention: the moments of ``N`` points are the
average of the per-point contributions, and image moments are normalised by
total mass, so a target computed from an image is directly comparable with
the moments of any number of robots.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "BasisKind",
    "MomentBasis",
    "MomentVector",
    "DensityGrid",
    "DomainError",
    "legendre_eval",
    "legendre_deriv",
    "legendre_table",
    "pz_radial_coeffs",
    "phi",
    "phi_batch",
    "phi_jacobian",
    "phi_jacobian_batch",
    "basis_functions",
    "moments_of_points",
    "moments_of_grid",
    "moments_of_field",
    "reconstruct",
    "msre",
    "MSRE_POINTS",
    "PZM_MAX_ORDER",
    "POLAR_EPS",
]

PZM_MAX_ORDER = 12
POLAR_EPS = 1e-9
MSRE_POINTS = 41
# slack on the unit-disk test so points placed exactly on the rim survive rounding
_DISK_SLACK = 1e-12


class DomainError(ValueError):
    """A pseudo-Zernike quantity was requested outside the unit disk."""


class BasisKind(str, enum.Enum):
    LEGENDRE = "legendre"
    PSEUDO_ZERNIKE = "pzm"

    @classmethod
    def parse(cls, value: "str | BasisKind") -> "BasisKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "legendre": cls.LEGENDRE,
            "lm": cls.LEGENDRE,
            "pzm": cls.PSEUDO_ZERNIKE,
            "pseudo_zernike": cls.PSEUDO_ZERNIKE,
            "pseudo-zernike": cls.PSEUDO_ZERNIKE,
            "pseudozernike": cls.PSEUDO_ZERNIKE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown moment basis {value!r}") from None


@dataclass(frozen=True)
class MomentBasis:
    """A moment family truncated at maximum order ``order``.

    Moments of order zero are never included.
    """

    kind: BasisKind
    order: int

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind.parse(self.kind))
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"moment order must be an integer >= 1, got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))
        if self.kind is BasisKind.PSEUDO_ZERNIKE and self.order > PZM_MAX_ORDER:
            raise ValueError(
                f"pseudo-Zernike order {self.order} exceeds supported maximum {PZM_MAX_ORDER}"
            )

    @property
    def complex_count(self) -> int:
        n = self.order
        return n * (n + 3) // 2

    @property
    def size(self) -> int:
        """Length of the real embedding."""
        return len(self.index)

    @property
    def index(self) -> tuple[tuple[int, int, str], ...]:
        return _index(self.kind, self.order)

    def flat_index(self, p: int, q: int, part: str = "Re") -> int:
        try:
            return _lookup(self.kind, self.order)[(p, q, part)]
        except KeyError:
            raise KeyError(f"({p}, {q}, {part}) is not a component of {self}") from None

    @property
    def degrees(self) -> np.ndarray:
        """Total order ``d`` of every embedded component."""
        if self.kind is BasisKind.LEGENDRE:
            return np.array([p + q for p, q, _ in self.index])
        return np.array([p for p, _, _ in self.index])

    def __str__(self):
        return f"{self.kind.value}[{self.order}]"


@lru_cache(maxsize=None)
def _index(kind: BasisKind, order: int) -> tuple[tuple[int, int, str], ...]:
    entries = []
    if kind is BasisKind.LEGENDRE:
        # grouped by total order d = p + q, as in the truncated series M_{d-q,q}
        for d in range(1, order + 1):
            for q in range(d + 1):
                entries.append((d - q, q, "Re"))
    else:
        for p in range(1, order + 1):
            for q in range(p + 1):
                entries.append((p, q, "Re"))
                if q > 0:
                    entries.append((p, q, "Im"))
    return tuple(entries)


@lru_cache(maxsize=None)
def _lookup(kind: BasisKind, order: int) -> dict:
    return {key: i for i, key in enumerate(_index(kind, order))}


@dataclass
class MomentVector:
    basis: MomentBasis
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape[0] != self.basis.size:
            raise ValueError(
                f"{self.basis} needs {self.basis.size} values, got {self.values.shape[0]}"
            )

    @classmethod
    def zeros(cls, basis: MomentBasis) -> "MomentVector":
        return cls(basis, np.zeros(basis.size))

    def __getitem__(self, key):
        if isinstance(key, tuple):
            return self.values[self.basis.flat_index(*key)]
        return self.values[key]

    def __len__(self):
        return self.values.shape[0]

    def __sub__(self, other: "MomentVector") -> "MomentVector":
        _check_same_basis(self, other)
        return MomentVector(self.basis, self.values - other.values)

    def __add__(self, other: "MomentVector") -> "MomentVector":
        _check_same_basis(self, other)
        return MomentVector(self.basis, self.values + other.values)

    def __mul__(self, scale: float) -> "MomentVector":
        return MomentVector(self.basis, self.values * float(scale))

    __rmul__ = __mul__

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def complex_values(self) -> np.ndarray:
        """Moments as complex numbers, one per ``(p, q)`` pair."""
        out = []
        for i, (p, q, part) in enumerate(self.basis.index):
            if part == "Re":
                out.append(complex(self.values[i], 0.0))
            else:
                out[-1] = complex(out[-1].real, self.values[i])
        return np.array(out)

    def with_order(self, order: int) -> "MomentVector":
        """Truncate, or zero-pad, to another maximum order of the same family."""
        basis = MomentBasis(self.basis.kind, order)
        out = np.zeros(basis.size)
        for i, key in enumerate(basis.index):
            j = _lookup(self.basis.kind, self.basis.order).get(key)
            if j is not None:
                out[i] = self.values[j]
        return MomentVector(basis, out)


def _check_same_basis(a: MomentVector, b: MomentVector):
    if a.basis != b.basis:
        raise ValueError(f"moment bases differ: {a.basis} vs {b.basis}")


@dataclass
class DensityGrid:
    """Values on an ``R x C`` pixel grid covering ``[-1, 1]^2``.

    ``values[j, i]`` sits at the pixel centre ``(x_i, y_j)``; row 0 is the
    bottom of the domain (smallest ``y``). Image files store the top row first
    and are flipped on read and write.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("density grid must be two-dimensional")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def x(self) -> np.ndarray:
        cols = self.values.shape[1]
        return -1.0 + (2.0 * np.arange(1, cols + 1) - 1.0) / cols

    @property
    def y(self) -> np.ndarray:
        rows = self.values.shape[0]
        return -1.0 + (2.0 * np.arange(1, rows + 1) - 1.0) / rows

    def centers(self) -> np.ndarray:
        """Pixel centres as an ``(R*C, 2)`` array in row-major order."""
        xx, yy = np.meshgrid(self.x, self.y)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def disk_mask(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.x, self.y)
        return np.hypot(xx, yy) <= 1.0

    @property
    def pixel_area(self) -> float:
        rows, cols = self.values.shape
        return 4.0 / (rows * cols)


# --------------------------------------------------------------------------
# Legendre polynomials


def legendre_table(n: int, x) -> np.ndarray:
    """``P_0(x) .. P_n(x)`` stacked along a new trailing axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n + 1,))
    out[..., 0] = 1.0
    if n >= 1:
        out[..., 1] = x
    for m in range(2, n + 1):
        out[..., m] = ((2 * m - 1) * x * out[..., m - 1] - (m - 1) * out[..., m - 2]) / m
    return out


def legendre_deriv_table(n: int, x, values: np.ndarray | None = None) -> np.ndarray:
    """Derivatives ``P'_0 .. P'_n`` via ``P'_m = P'_{m-2} + (2m-1) P_{m-1}``.

    This form has no singularity at ``x = +-1``.
    """
    x = np.asarray(x, dtype=float)
    if values is None:
        values = legendre_table(n, x)
    out = np.zeros(x.shape + (n + 1,))
    if n >= 1:
        out[..., 1] = 1.0
    for m in range(2, n + 1):
        out[..., m] = out[..., m - 2] + (2 * m - 1) * values[..., m - 1]
    return out


def legendre_eval(m: int, x):
    """Legendre polynomial ``P_m`` by Bonnet's three-term recurrence."""
    if m < 0:
        raise ValueError("Legendre order must be non-negative")
    return legendre_table(m, x)[..., m]


def legendre_deriv(m: int, x):
    if m < 0:
        raise ValueError("Legendre order must be non-negative")
    return legendre_deriv_table(m, x)[..., m]


# --------------------------------------------------------------------------
# pseudo-Zernike radial polynomials


@lru_cache(maxsize=None)
def _radial_coeffs(p: int, q: int) -> tuple[int, ...]:
    # each coefficient is a multinomial coefficient, so integer arithmetic is exact
    coeffs = []
    for k in range(q, p + 1):
        num = math.factorial(p + k + 1)
        den = math.factorial(p - k) * math.factorial(q + k + 1) * math.factorial(k - q)
        coeffs.append((-1) ** (p - k) * (num // den))
    return tuple(coeffs)


def pz_radial_coeffs(p: int, q: int) -> np.ndarray:
    """Coefficients ``B_pqk`` for ``k = q .. p`` of the radial polynomial ``S_pq``."""
    if p < 0 or q < 0:
        raise ValueError("pseudo-Zernike indices must be non-negative")
    if q > p:
        raise ValueError(f"repetition q={q} exceeds order p={p}")
    if p > PZM_MAX_ORDER:
        raise ValueError(f"pseudo-Zernike order {p} exceeds supported maximum {PZM_MAX_ORDER}")
    return np.array(_radial_coeffs(p, q), dtype=float)


@lru_cache(maxsize=None)
def _pz_tables(order: int):
    """Per-component coefficient matrix over powers ``r^0 .. r^order`` and constants."""
    index = _index(BasisKind.PSEUDO_ZERNIKE, order)
    coeff = np.zeros((order + 1, len(index)))
    q = np.empty(len(index), dtype=int)
    norm = np.empty(len(index))
    imag = np.empty(len(index), dtype=bool)
    for col, (p, rep, part) in enumerate(index):
        coeff[rep : p + 1, col] = _radial_coeffs(p, rep)
        q[col] = rep
        norm[col] = (p + 1) / math.pi
        imag[col] = part == "Im"
    for arr in (coeff, q, norm, imag):
        arr.setflags(write=False)
    return coeff, q, norm, imag


@lru_cache(maxsize=None)
def _lm_tables(order: int):
    index = _index(BasisKind.LEGENDRE, order)
    ps = np.array([p for p, _, _ in index])
    qs = np.array([q for _, q, _ in index])
    norm = (2 * ps + 1) * (2 * qs + 1) / 4.0
    for arr in (ps, qs, norm):
        arr.setflags(write=False)
    return ps, qs, norm


def _as_points(positions) -> np.ndarray:
    pts = np.asarray(positions, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("positions must have shape (N, 2)")
    return pts


def _polar(pts: np.ndarray, check: bool = True):
    r = np.hypot(pts[:, 0], pts[:, 1])
    if check and np.any(r > 1.0 + _DISK_SLACK):
        worst = float(r.max())
        raise DomainError(f"pseudo-Zernike moments need r <= 1, got r = {worst:.6g}")
    theta = np.arctan2(pts[:, 1], pts[:, 0])
    return r, theta


def _powers(r: np.ndarray, order: int) -> np.ndarray:
    return r[:, None] ** np.arange(order + 1)[None, :]


# --------------------------------------------------------------------------
# moment-generating function and its Jacobian


def phi_batch(basis: MomentBasis, positions) -> np.ndarray:
    """Per-point moment contributions, shape ``(N, basis.size)``."""
    pts = _as_points(positions)
    n = basis.order
    if basis.kind is BasisKind.LEGENDRE:
        ps, qs, norm = _lm_tables(n)
        px = legendre_table(n, pts[:, 0])
        py = legendre_table(n, pts[:, 1])
        return norm * px[:, ps] * py[:, qs]

    coeff, q, norm, imag = _pz_tables(n)
    r, theta = _polar(pts)
    radial = _powers(r, n) @ coeff
    angle = q[None, :] * theta[:, None]
    # W*_pq = S_pq(r) e^{-j q theta}
    trig = np.where(imag, -np.sin(angle), np.cos(angle))
    return norm * radial * trig


def phi(basis: MomentBasis, s) -> np.ndarray:
    """Contribution of one point at ``s = (x, y)`` to the swarm moments."""
    return phi_batch(basis, np.asarray(s, dtype=float).reshape(1, 2))[0]


def phi_jacobian_batch(basis: MomentBasis, positions) -> np.ndarray:
    """``d phi / d(x, y)`` for every point, shape ``(N, basis.size, 2)``.

    Pseudo-Zernike rows are computed through polar coordinates. Within
    ``POLAR_EPS`` of the origin all rows are set to zero: the radial terms
    have no gradient at the cone point and the angular terms take the
    zero-limit convention.
    """
    pts = _as_points(positions)
    n = basis.order
    if basis.kind is BasisKind.LEGENDRE:
        ps, qs, norm = _lm_tables(n)
        px = legendre_table(n, pts[:, 0])
        py = legendre_table(n, pts[:, 1])
        dpx = legendre_deriv_table(n, pts[:, 0], px)
        dpy = legendre_deriv_table(n, pts[:, 1], py)
        jac = np.empty((pts.shape[0], basis.size, 2))
        jac[:, :, 0] = norm * dpx[:, ps] * py[:, qs]
        jac[:, :, 1] = norm * px[:, ps] * dpy[:, qs]
        return jac

    coeff, q, norm, imag = _pz_tables(n)
    r, theta = _polar(pts)
    k = np.arange(n + 1)
    # r^(k-1); the k = 0 column only feeds q = 0 terms, whose angular part vanishes
    rkm1 = np.where(k[None, :] >= 1, r[:, None] ** np.maximum(k - 1, 0)[None, :], 0.0)
    d_radial = (rkm1 * k[None, :]) @ coeff
    radial_over_r = rkm1 @ coeff

    angle = q[None, :] * theta[:, None]
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    # Re: S cos(q t); Im: -S sin(q t)
    d_dr = np.where(imag, -d_radial * sin_a, d_radial * cos_a)
    d_dt_over_r = np.where(imag, -q * radial_over_r * cos_a, -q * radial_over_r * sin_a)

    ct, st = np.cos(theta)[:, None], np.sin(theta)[:, None]
    jac = np.empty((pts.shape[0], basis.size, 2))
    jac[:, :, 0] = norm * (ct * d_dr - st * d_dt_over_r)
    jac[:, :, 1] = norm * (st * d_dr + ct * d_dt_over_r)
    jac[r < POLAR_EPS] = 0.0
    return jac


def phi_jacobian(basis: MomentBasis, s) -> np.ndarray:
    return phi_jacobian_batch(basis, np.asarray(s, dtype=float).reshape(1, 2))[0]


def basis_functions(basis: MomentBasis, positions, mask_disk: bool = True) -> np.ndarray:
    """Matrix ``B`` with ``f(points) = B @ M.values`` for the truncated series.

    Pseudo-Zernike columns include the conjugate terms, so the series is
    ``sum_p M_p0 W_p0 + 2 Re sum_{q>0} M_pq W_pq`` and is always real.
    Points outside the unit disk get zero rows when ``mask_disk`` is set.
    """
    pts = _as_points(positions)
    n = basis.order
    if basis.kind is BasisKind.LEGENDRE:
        ps, qs, _ = _lm_tables(n)
        return legendre_table(n, pts[:, 0])[:, ps] * legendre_table(n, pts[:, 1])[:, qs]

    coeff, q, _, imag = _pz_tables(n)
    r, theta = _polar(pts, check=False)
    radial = _powers(r, n) @ coeff
    angle = q[None, :] * theta[:, None]
    scale = np.where(q > 0, 2.0, 1.0)
    # 2 Re(M W) = 2 (Re M cos - Im M sin) S
    trig = np.where(imag, -np.sin(angle), np.cos(angle))
    out = scale * radial * trig
    if mask_disk:
        out[r > 1.0 + _DISK_SLACK] = 0.0
    return out


# --------------------------------------------------------------------------
# moments of point sets and grids


def moments_of_points(basis: MomentBasis, positions) -> MomentVector:
    pts = _as_points(positions)
    if pts.shape[0] == 0:
        raise ValueError("need at least one point")
    return MomentVector(basis, phi_batch(basis, pts).mean(axis=0))


def moments_of_grid(basis: MomentBasis, grid: DensityGrid) -> MomentVector:
    """Mass-normalised moments of a non-negative density grid.

    Each pixel is a point mass ``mu_ij / sum(mu)`` at its centre. For
    pseudo-Zernike moments pixels outside the unit disk carry no mass.
    """
    mass = np.array(grid.values, dtype=float)
    if np.any(mass < 0) or not np.all(np.isfinite(mass)):
        raise ValueError("density grid masses must be finite and non-negative")
    if basis.kind is BasisKind.PSEUDO_ZERNIKE:
        mass = np.where(grid.disk_mask(), mass, 0.0)
    total = mass.sum()
    if total <= 0:
        raise ValueError("density grid has zero total mass")
    weights = mass.ravel() / total
    keep = weights > 0
    contrib = phi_batch(basis, grid.centers()[keep])
    return MomentVector(basis, weights[keep] @ contrib)


def moments_of_field(basis: MomentBasis, grid: DensityGrid) -> MomentVector:
    """Moments of a signed field by midpoint quadrature, with no mass normalisation.

    This is the projection onto the basis, so
    ``moments_of_field(reconstruct(M, ...)) ~ M``.
    """
    values = grid.values.ravel()
    pts = grid.centers()
    if basis.kind is BasisKind.PSEUDO_ZERNIKE:
        inside = grid.disk_mask().ravel()
        values, pts = values[inside], pts[inside]
    return MomentVector(basis, (values * grid.pixel_area) @ phi_batch(basis, pts))


def reconstruct(M: MomentVector, resolution=(64, 64)) -> DensityGrid:
    """Evaluate the truncated series at pixel centres (no zeroth-order term)."""
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    rows, cols = resolution
    if rows < 2 or cols < 2:
        raise ValueError("reconstruction needs at least 2x2 pixels")
    grid = DensityGrid(np.zeros((rows, cols)))
    field = basis_functions(M.basis, grid.centers()) @ M.values
    grid.values = field.reshape(rows, cols)
    return grid


@lru_cache(maxsize=None)
def _msre_matrix(kind: BasisKind, order: int) -> np.ndarray:
    ticks = np.linspace(-1.0, 1.0, MSRE_POINTS)
    xx, yy = np.meshgrid(ticks, ticks)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    if kind is BasisKind.PSEUDO_ZERNIKE:
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) <= 1.0 + _DISK_SLACK]
    mat = basis_functions(MomentBasis(kind, order), pts)
    mat.setflags(write=False)
    return mat


def msre(M1: MomentVector, M2: MomentVector) -> float:
    """Mean-square reconstruction error of ``M1`` against the desired ``M2``.

    Both reconstructions are sampled on a 41 x 41 lattice with spacing 0.05;
    pseudo-Zernike reconstructions only use lattice points inside the unit
    circle.
    """
    _check_same_basis(M1, M2)
    mat = _msre_matrix(M2.basis.kind, M2.basis.order)
    f1 = mat @ M1.values
    f2 = mat @ M2.values
    denom = float(f2 @ f2)
    if denom == 0.0:
        raise ValueError("desired moments reconstruct to zero; MSRE undefined")
    diff = f1 - f2
    return float(diff @ diff) / denom
