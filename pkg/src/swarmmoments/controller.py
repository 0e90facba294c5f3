"""Gradient moment-matching control, gain schedule and velocity post-processing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .moments import MomentBasis, MomentVector, moments_of_points, phi_jacobian_batch

__all__ = [
    "GainSchedule",
    "ControlParams",
    "gain_matrix",
    "control_velocity",
    "control_velocities",
    "collision_filter",
    "collision_velocities",
    "saturate_deadband",
    "saturate_deadband_batch",
    "stacked_jacobian",
    "stacked_jacobian_rank",
    "cost",
    "DescentResult",
    "descend",
    "write_gain_csv",
]


@dataclass(frozen=True)
class GainSchedule:
    """Diagonal gain over the real embedding; component of order ``d`` gets ``scale * d**-beta``."""

    basis: MomentBasis
    beta: float
    diag: np.ndarray

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)

    def scaled(self, factor: float) -> "GainSchedule":
        return GainSchedule(self.basis, self.beta, self.diag * float(factor))


def gain_matrix(n: int, beta: float, basis: MomentBasis, scale: float = 1.0) -> GainSchedule:
    if n < 1:
        raise ValueError("order must be >= 1")
    if beta < 0:
        raise ValueError("gain exponent must be non-negative")
    if scale <= 0:
        raise ValueError("gain scale must be positive")
    if basis.order != n:
        basis = MomentBasis(basis.kind, n)
    diag = scale * basis.degrees.astype(float) ** (-float(beta))
    diag.setflags(write=False)
    return GainSchedule(basis, float(beta), diag)


@dataclass(frozen=True)
class ControlParams:
    """Velocity limits and collision zones, in domain units per step.

    Repulsion is ``k1`` inside ``r1``, ``k2`` in ``[r1, r2)`` and ``k3`` in
    ``[r2, r3)``. Set ``v_max`` to ``inf`` and ``v_min`` to 0 to disable
    saturation and the deadband; set all ``k`` to 0 to disable repulsion.
    """

    v_max: float = 0.01
    v_min: float = 0.001
    r1: float = 0.05
    r2: float = 0.08
    r3: float = 0.12
    k1: float | None = None
    k2: float | None = None
    k3: float | None = None
    dt: float = 1.0

    def __post_init__(self):
        # zone gains default to multiples of the speed cap
        cap = self.v_max if math.isfinite(self.v_max) else 0.01
        for name, mult in (("k1", 3.0), ("k2", 1.0), ("k3", 0.3)):
            if getattr(self, name) is None:
                object.__setattr__(self, name, mult * cap)
        if not 0.0 <= self.v_min < self.v_max:
            raise ValueError("need 0 <= v_min < v_max")
        if not 0.0 < self.r1 < self.r2 < self.r3:
            raise ValueError("collision radii must satisfy 0 < r1 < r2 < r3")
        if min(self.k1, self.k2, self.k3) < 0:
            raise ValueError("repulsion gains must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def collisions_enabled(self) -> bool:
        return max(self.k1, self.k2, self.k3) > 0


def control_velocity(jac, Mhat: MomentVector, Mstar: MomentVector, gain: GainSchedule) -> np.ndarray:
    """Gradient law ``-J^T Gamma (Mhat - M*)`` for one robot."""
    jac = np.asarray(jac, dtype=float)
    if Mhat.basis != Mstar.basis or Mhat.basis != gain.basis:
        raise ValueError("estimate, target and gain must share one moment basis")
    if jac.shape != (Mhat.basis.size, 2):
        raise ValueError(f"Jacobian shape {jac.shape} does not match {Mhat.basis}")
    return -jac.T @ (gain.diag * (Mhat.values - Mstar.values))


def control_velocities(jacs: np.ndarray, errors: np.ndarray, gain: GainSchedule) -> np.ndarray:
    """Vectorised law: ``jacs`` is ``(N, m, 2)``, ``errors`` is ``(N, m)`` or ``(m,)``."""
    errors = np.broadcast_to(errors, jacs.shape[:2])
    return -np.einsum("nmk,nm->nk", jacs, errors * gain.diag)


def _zone_gain(dist, params: ControlParams):
    return np.where(
        dist < params.r1,
        params.k1,
        np.where(dist < params.r2, params.k2, np.where(dist < params.r3, params.k3, 0.0)),
    )


def _random_unit(rng, shape):
    angle = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def collision_filter(v, position, neighbors, params: ControlParams, rng=None) -> np.ndarray:
    """Add zone-based repulsion from every neighbour closer than ``r3``.

    Coincident neighbours push along a random unit direction drawn from ``rng``.
    """
    v = np.asarray(v, dtype=float).copy()
    nbrs = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    if nbrs.shape[0] == 0:
        return v
    away = np.asarray(position, dtype=float) - nbrs
    dist = np.hypot(away[:, 0], away[:, 1])
    close = dist < params.r3
    if not close.any():
        return v
    away, dist = away[close], dist[close]
    coincident = dist == 0.0
    units = np.empty_like(away)
    units[~coincident] = away[~coincident] / dist[~coincident, None]
    if coincident.any():
        rng = rng if rng is not None else np.random.default_rng(0)
        units[coincident] = _random_unit(rng, int(coincident.sum()))
    return v + (_zone_gain(dist, params)[:, None] * units).sum(axis=0)


def collision_velocities(positions, params: ControlParams, rng=None) -> np.ndarray:
    """Repulsion term for every robot at once, shape ``(N, 2)``."""
    pts = np.asarray(positions, dtype=float)
    if not params.collisions_enabled or pts.shape[0] < 2:
        return np.zeros_like(pts)
    away = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(away[..., 0], away[..., 1])
    np.fill_diagonal(dist, np.inf)
    gain = _zone_gain(dist, params)
    coincident = dist == 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        units = away / dist[..., None]
    if coincident.any():
        rng = rng if rng is not None else np.random.default_rng(0)
        i, j = np.nonzero(np.triu(coincident))
        dirs = _random_unit(rng, i.size)
        units[i, j] = dirs
        units[j, i] = -dirs
    units[~np.isfinite(units)] = 0.0
    return (gain[..., None] * units).sum(axis=1)


def saturate_deadband(v, params: ControlParams) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    speed = float(np.hypot(*v))
    if speed < params.v_min:
        return np.zeros(2)
    if speed > params.v_max:
        return v * (params.v_max / speed)
    return v.copy()


def saturate_deadband_batch(v: np.ndarray, params: ControlParams) -> np.ndarray:
    speed = np.hypot(v[:, 0], v[:, 1])
    scale = np.ones_like(speed)
    fast = speed > params.v_max
    scale[fast] = params.v_max / speed[fast]
    scale[speed < params.v_min] = 0.0
    return v * scale[:, None]


def stacked_jacobian(basis: MomentBasis, positions) -> np.ndarray:
    """Per-robot Jacobian blocks side by side, shape ``(m, 2N)``.

    Under the mean convention ``dM/ds`` is this matrix divided by ``N``.
    """
    jacs = phi_jacobian_batch(basis, positions)
    return np.concatenate(list(jacs), axis=1) if len(jacs) else np.zeros((basis.size, 0))


def stacked_jacobian_rank(basis: MomentBasis, positions, tol: float = 1e-10) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    sv = np.linalg.svd(stacked_jacobian(basis, positions), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def cost(M: MomentVector, Mstar: MomentVector, gain: GainSchedule) -> float:
    e = M.values - Mstar.values
    return 0.5 * float(e @ (gain.diag * e))


@dataclass
class DescentResult:
    positions: np.ndarray
    costs: np.ndarray
    errors: np.ndarray
    dts: np.ndarray


def descend(basis: MomentBasis, positions, Mstar: MomentVector, gain: GainSchedule,
            steps: int, dt: float = 1.0, max_halvings: int = 40, clip=None) -> DescentResult:
    """Euler steps of the gradient law with perfect moment knowledge.

    Every step starts from ``dt``; whenever the step would raise the cost the
    step length is halved and the step retried. After ``max_halvings`` failed
    attempts the robots stay put. ``clip`` optionally maps positions back into
    the domain after each trial step.
    """
    pos = np.array(positions, dtype=float)
    M = moments_of_points(basis, pos)
    c = cost(M, Mstar, gain)
    costs = np.empty(steps + 1)
    errors = np.empty(steps + 1)
    dts = np.zeros(steps)
    costs[0] = c
    errors[0] = (M - Mstar).norm()
    for t in range(steps):
        vel = control_velocities(phi_jacobian_batch(basis, pos), M.values - Mstar.values, gain)
        h = dt
        for _ in range(max_halvings):
            trial = pos + h * vel
            if clip is not None:
                trial = clip(trial)
            M_trial = moments_of_points(basis, trial)
            c_trial = cost(M_trial, Mstar, gain)
            if c_trial <= c:
                pos, M, c = trial, M_trial, c_trial
                dts[t] = h
                break
            h *= 0.5
        costs[t + 1] = c
        errors[t + 1] = (M - Mstar).norm()
    return DescentResult(pos, costs, errors, dts)


def write_gain_csv(gain: GainSchedule, path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "p", "q", "part", "gamma"])
        for i, ((p, q, part), g) in enumerate(zip(gain.basis.index, gain.diag)):
            writer.writerow([i, p, q, part, repr(float(g))])
