"""Self-healing push-sum estimation of the swarm moment vector.

Each robot keeps two vectors ``w`` and ``v`` of length ``m + 1`` (``m`` is the
real embedding length of the moment basis). Per step

    v = u - d_out * w + sum(memory)
    w <- w + gamma * v

and the estimate is ``v[:m] / v[m]``. The memory holds the last message from
every in-neighbour and is used in place of a dropped packet; an entry that has
not been refreshed for more than ``horizon`` steps is discarded. A horizon of
zero therefore means "no memory": only messages received this step count.

Two implementations live here: a per-robot one (:func:`estimator_step`) that
mirrors what a single robot runs, and :class:`SwarmEstimator`, a vectorised
version over all robots used by the simulator. Tests check they agree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .moments import MomentBasis, MomentVector

log = logging.getLogger(__name__)

__all__ = [
    "ConfigurationError",
    "EstimateUnavailable",
    "EstimatorState",
    "Message",
    "SwarmEstimator",
    "estimator_input",
    "estimator_step",
    "estimate_moments",
    "DIV_EPS",
]

DIV_EPS = 1e-9


class ConfigurationError(ValueError):
    """Estimator gain too large for the current out-degree."""


class EstimateUnavailable(ArithmeticError):
    """The weight component of ``v`` is too close to zero to divide by."""


@dataclass(frozen=True)
class Message:
    sender: int
    payload: np.ndarray


@dataclass
class EstimatorState:
    w: np.ndarray
    v: np.ndarray
    gain: float
    horizon: int
    memory: dict = field(default_factory=dict)  # sender -> (payload, age)

    @classmethod
    def initial(cls, size: int, gain: float, horizon: int) -> "EstimatorState":
        """Zero state for a basis whose real embedding has ``size`` entries."""
        return cls(np.zeros(size + 1), np.zeros(size + 1), gain, horizon)


def estimator_input(phi_value) -> np.ndarray:
    phi_value = np.asarray(phi_value, dtype=float).reshape(-1)
    return np.append(phi_value, 1.0)


def _check_gain(gain: float, d_out):
    worst = float(np.max(d_out)) if np.size(d_out) else 0.0
    if gain <= 0:
        raise ConfigurationError(f"estimator gain must be positive, got {gain}")
    if gain * worst >= 1.0:
        raise ConfigurationError(
            f"estimator gain {gain:g} times out-degree {worst:g} must stay below 1"
        )


def estimator_step(state: EstimatorState, u, received, d_out: int) -> EstimatorState:
    """One push-sum update for a single robot; returns a new state."""
    _check_gain(state.gain, d_out)
    u = np.asarray(u, dtype=float)
    w = state.w

    memory = {k: (payload, age + 1) for k, (payload, age) in state.memory.items()}
    for msg in received:
        payload = np.asarray(msg.payload, dtype=float)
        if payload.shape != w.shape:
            raise ValueError(f"message from {msg.sender} has length {payload.size}, expected {w.size}")
        memory[msg.sender] = (payload, 0)
    memory = {k: item for k, item in memory.items() if item[1] <= state.horizon}

    # u - d*w + sum(mem) regrouped as differences, which stay small while w grows
    inflow = np.zeros_like(w)
    for payload, _ in memory.values():
        inflow += payload - w
    v = u + inflow - (d_out - len(memory)) * w
    return EstimatorState(w + state.gain * v, v, state.gain, state.horizon, memory)


def estimate_moments(state: EstimatorState, basis: MomentBasis) -> MomentVector:
    weight = state.v[-1]
    if abs(weight) <= DIV_EPS:
        raise EstimateUnavailable(f"weight component {weight:g} too small")
    return MomentVector(basis, state.v[:-1] / weight)


class SwarmEstimator:
    """All robots' estimator states as arrays indexed by slot.

    A slot is a robot id. Removed robots keep their slot (``alive`` False) so
    that the memory entries other robots hold for them age out normally.
    """

    def __init__(self, n_slots: int, size: int, gain: float, horizon: int):
        self.size = size
        self.gain = float(gain)
        self.horizon = int(horizon)
        self.w = np.zeros((n_slots, size + 1))
        self.v = np.zeros((n_slots, size + 1))
        # memory[k, i]: last payload robot i got from robot k
        self.memory = np.zeros((n_slots, n_slots, size + 1))
        self.age = np.full((n_slots, n_slots), np.iinfo(np.int64).max // 2, dtype=np.int64)
        self.held = np.zeros((n_slots, n_slots), dtype=bool)
        self.estimate = np.zeros((n_slots, size))
        self.unavailable = np.zeros(n_slots, dtype=bool)

    @property
    def n_slots(self) -> int:
        return self.w.shape[0]

    def grow(self, extra: int):
        """Append ``extra`` fresh slots (zero state, empty memory)."""
        n, m1 = self.n_slots, self.size + 1
        new = n + extra
        self.w = np.vstack([self.w, np.zeros((extra, m1))])
        self.v = np.vstack([self.v, np.zeros((extra, m1))])
        memory = np.zeros((new, new, m1))
        memory[:n, :n] = self.memory
        self.memory = memory
        age = np.full((new, new), np.iinfo(np.int64).max // 2, dtype=np.int64)
        age[:n, :n] = self.age
        self.age = age
        held = np.zeros((new, new), dtype=bool)
        held[:n, :n] = self.held
        self.held = held
        self.estimate = np.vstack([self.estimate, np.zeros((extra, self.size))])
        self.unavailable = np.concatenate([self.unavailable, np.zeros(extra, dtype=bool)])

    def step(self, u: np.ndarray, delivered: np.ndarray, broadcasts: np.ndarray,
             d_out: np.ndarray, alive: np.ndarray):
        """Advance every live robot by one step.

        ``delivered[k, i]`` marks a message from ``k`` that reached ``i`` this
        step, carrying ``broadcasts[k]``. Rows of ``u`` and ``d_out`` belong to
        dead slots are ignored.
        """
        everyone = bool(alive.all())
        _check_gain(self.gain, d_out if everyone else d_out[alive])
        w = self.w
        center = w.mean(axis=0) if everyone else w[alive].mean(axis=0)
        if self.horizon == 0:
            # no memory: only this step's packets count, so skip the table entirely
            held = delivered
            inflow = held.T.astype(float) @ (broadcasts - center)
        else:
            self.memory[delivered] = np.broadcast_to(
                broadcasts[:, None, :], self.memory.shape
            )[delivered]
            self.age += 1
            self.age[delivered] = 0
            self.held = held = self.age <= self.horizon
            inflow = np.einsum("ki,kic->ic", held.astype(float), self.memory - center)
        n_held = held.sum(axis=0)
        # algebraically u - d*w + sum(mem); shifting by a common vector keeps
        # the cancellation between large, nearly equal terms exact
        v = u + inflow - n_held[:, None] * (w - center) - (d_out - n_held)[:, None] * w
        if everyone:
            self.v = v
            self.w = w + self.gain * v
        else:
            v[~alive] = 0.0
            self.v = v
            self.w = np.where(alive[:, None], w + self.gain * v, w)
        self._update_estimates(alive, everyone)

    def _update_estimates(self, alive: np.ndarray, everyone: bool = False):
        weight = self.v[:, -1]
        ok = np.abs(weight) > DIV_EPS
        if everyone and ok.all():
            self.estimate = self.v[:, :-1] / weight[:, None]
            self.unavailable = np.zeros_like(ok)
            return
        ok &= alive
        self.estimate[ok] = self.v[ok, :-1] / weight[ok, None]
        self.unavailable = alive & ~ok
        if self.unavailable.any():
            log.debug("estimate held for %d robots (weight below %g)",
                      int(self.unavailable.sum()), DIV_EPS)

    def reset_slot(self, slot: int, estimate: np.ndarray | None = None):
        """Give ``slot`` a fresh zero state; its memory of others is cleared."""
        self.w[slot] = 0.0
        self.v[slot] = 0.0
        self.age[:, slot] = np.iinfo(np.int64).max // 2
        self.held[:, slot] = False
        if estimate is not None:
            self.estimate[slot] = estimate
