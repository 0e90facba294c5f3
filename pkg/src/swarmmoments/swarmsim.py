"""Synchronous simulation of a swarm that estimates and controls its moments.

One iteration, for every robot at once:

1. build the estimator input ``u = [phi(s), 1]`` from the current position;
2. deliver (or drop) the messages broadcast at the end of the last iteration;
3. run the push-sum update;
4. broadcast the new ``w``;
5. compute the control velocity (estimated moments in ``coupled`` mode, the
   true moments in ``control_only_perfect``, nothing in ``estimate_only``);
6. add collision repulsion, then saturate and apply the deadband;
7. move by forward Euler and keep robots inside the domain;
8. rebuild a radius topology from the new positions;
9. apply scheduled add/remove events;
10. log metrics.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import shapes
from .controller import (
    ControlParams,
    GainSchedule,
    collision_velocities,
    control_velocities,
    gain_matrix,
    saturate_deadband_batch,
)
from .estimator import SwarmEstimator
from .fileio import load_density, read_moments_csv
from .moments import (
    BasisKind,
    MomentBasis,
    MomentVector,
    moments_of_grid,
    moments_of_points,
    msre,
    phi_batch,
    phi_jacobian_batch,
)
from .network import (
    Digraph,
    PacketLossModel,
    build_radius_graph,
    from_edges,
    parse_topology,
    sample_delivery,
    strongly_connected,
)

log = logging.getLogger(__name__)

__all__ = [
    "MODES",
    "Target",
    "Event",
    "Scenario",
    "MetricLog",
    "SimState",
    "RunResult",
    "init_state",
    "step",
    "run",
    "add_robots",
    "remove_robots",
    "resolve_target",
]

MODES = ("estimate_only", "control_only_perfect", "coupled")
PZM_CLIP_RADIUS = 0.999


@dataclass
class Target:
    """Exactly one of ``shape``, ``image``, ``moments`` or ``points`` is set.

    ``points`` makes the target the moments of that robot configuration, which
    guarantees a reachable target.
    """

    shape: str | None = None
    image: str | None = None
    moments: str | None = None
    points: list | None = None
    invert: bool = False
    resolution: int = 128

    def __post_init__(self):
        given = [k for k in ("shape", "image", "moments", "points") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError("target needs exactly one of 'shape', 'image', 'moments' or 'points'")


@dataclass
class Event:
    """Add or remove robots once ``iteration`` has been simulated.

    Additions use explicit ``positions`` or ``count`` robots uniform in
    ``region = [xmin, xmax, ymin, ymax]``. Removals use explicit ``ids`` or
    ``count`` random robots, restricted to ``region`` when given.
    """

    iteration: int
    action: str
    count: int | None = None
    positions: list | None = None
    ids: list | None = None
    region: list | None = None

    def __post_init__(self):
        if self.action not in ("add", "remove"):
            raise ValueError(f"event action must be 'add' or 'remove', got {self.action!r}")
        if self.iteration < 1:
            raise ValueError("event iteration must be >= 1")
        if self.action == "add" and self.positions is None and self.count is None:
            raise ValueError("add event needs 'positions' or 'count'")
        if self.action == "remove" and self.ids is None and self.count is None:
            raise ValueError("remove event needs 'ids' or 'count'")
        if self.region is not None and len(self.region) != 4:
            raise ValueError("region must be [xmin, xmax, ymin, ymax]")


@dataclass
class Scenario:
    n_robots: int = 50
    basis: str = "legendre"
    order: int = 8
    mode: str = "coupled"
    target: Target | None = None
    topology: str | list = "all_to_all"
    drop_rate: float = 0.0
    # gamma = gamma_scale / N (recomputed when N changes) unless gamma is fixed
    gamma: float | None = None
    gamma_scale: float = 1.0
    memory: bool = True
    # None: 75 for estimate_only, ceil(1.5 N) otherwise
    forget_horizon: int | None = None
    beta: float = 1.7
    gain_scale: float = 1.0
    control: ControlParams = field(default_factory=ControlParams)
    iterations: int = 10000
    seed: int = 0
    # positions have their own seed so trials can share a configuration
    position_seed: int | None = None
    init_shape: str = "disk"
    init_radius: float = 0.25
    initial_positions: list | None = None
    events: list[Event] = field(default_factory=list)
    convergence_tol: float = 0.01
    plateau_window: int = 500
    plateau_tol: float = 1e-4
    stop_on_convergence: bool = True
    trace_robot: int = 15
    name: str = "scenario"
    # write metric rows every k iterations (convergence checks still see every step)
    log_every: int = 1

    def __post_init__(self):
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_robots < 1:
            raise ValueError("n_robots must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ValueError("drop_rate must lie in [0, 1)")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_scale <= 0:
            raise ValueError("gamma_scale must be positive")
        if self.forget_horizon is not None and self.forget_horizon < 0:
            raise ValueError("forget_horizon must be >= 0")
        if self.init_shape not in ("disk", "square"):
            raise ValueError("init_shape must be 'disk' or 'square'")
        if self.mode != "estimate_only" and self.target is None:
            raise ValueError(f"mode {self.mode!r} needs a target")
        if self.initial_positions is not None and len(self.initial_positions) != self.n_robots:
            raise ValueError("initial_positions must list n_robots points")
        parse_topology(self.topology)
        MomentBasis(self.basis, self.order)
        self.events = sorted(self.events, key=lambda e: e.iteration)

    @property
    def moment_basis(self) -> MomentBasis:
        return MomentBasis(self.basis, self.order)

    def gain_schedule(self) -> GainSchedule:
        return gain_matrix(self.order, self.beta, self.moment_basis, self.gain_scale)

    def gamma_for(self, n_alive: int) -> float:
        return self.gamma if self.gamma is not None else self.gamma_scale / n_alive

    def horizon_for(self, n_alive: int) -> int:
        if not self.memory:
            return 0
        if self.forget_horizon is not None:
            return self.forget_horizon
        if self.mode == "estimate_only":
            return 75
        return math.ceil(1.5 * n_alive)


class MetricLog:
    """Rows of ``(iteration, metric, robot_id, value)``; ``robot_id`` is None for swarm metrics."""

    def __init__(self):
        self.rows: list[tuple[int, str, int | None, float]] = []

    def add(self, iteration: int, metric: str, value: float, robot_id: int | None = None):
        self.rows.append((int(iteration), metric, robot_id, float(value)))

    def series(self, metric: str, robot_id: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        it, val = [], []
        for t, name, rid, v in self.rows:
            if name == metric and (robot_id is None or rid == robot_id):
                it.append(t)
                val.append(v)
        return np.array(it, dtype=int), np.array(val)

    def last(self, metric: str, robot_id: int | None = None) -> float | None:
        for t, name, rid, v in reversed(self.rows):
            if name == metric and (robot_id is None or rid == robot_id):
                return v
        return None

    def write_csv(self, path):
        with Path(path).open("w") as fh:
            fh.write("iteration,metric,robot_id,value\n")
            for t, name, rid, v in self.rows:
                fh.write(f"{t},{name},{'' if rid is None else rid},{v!r}\n")


@dataclass
class SimState:
    t: int
    basis: MomentBasis
    target: MomentVector | None
    gain: GainSchedule
    positions: np.ndarray  # (slots, 2); NaN for removed robots
    alive: np.ndarray
    graph: Digraph
    estimator: SwarmEstimator
    broadcasts: np.ndarray
    loss: PacketLossModel
    rngs: dict
    log: MetricLog
    phase_start: int = 0
    phase_error0: float = math.inf
    converged_at: list = field(default_factory=list)
    phase_converged: bool = False
    # latest values per swarm metric, kept alongside the log for cheap lookups
    history: dict = field(default_factory=dict)
    # quantities that depend only on positions; cleared whenever robots move
    cache: dict = field(default_factory=dict)
    pending: tuple | None = None

    @property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    def live_positions(self) -> np.ndarray:
        return self.positions[self.alive]

    def invalidate(self):
        self.cache.clear()

    def contributions(self) -> np.ndarray:
        """``phi`` of every live robot, in slot order."""
        if "phi" not in self.cache:
            self.cache["phi"] = phi_batch(self.basis, self.live_positions())
        return self.cache["phi"]

    def true_moments(self) -> MomentVector:
        if "M" not in self.cache:
            self.cache["M"] = MomentVector(self.basis, self.contributions().mean(axis=0))
        return self.cache["M"]

    def estimator_inputs(self) -> np.ndarray:
        """``[phi, 1]`` per slot; rows of removed robots are zero."""
        if "u" not in self.cache:
            u = np.zeros((self.alive.size, self.basis.size + 1))
            u[self.alive, :-1] = self.contributions()
            u[self.alive, -1] = 1.0
            self.cache["u"] = u
        return self.cache["u"]

    def estimates(self) -> np.ndarray:
        """Current moment estimates of the live robots, in slot order."""
        return self.estimator.estimate[self.alive]


@dataclass
class RunResult:
    state: SimState
    log: MetricLog
    converged: bool
    converged_at: list

    @property
    def iterations(self) -> int:
        return self.state.t


def resolve_target(scenario: Scenario, base_dir=None) -> MomentVector | None:
    target = scenario.target
    if target is None:
        return None
    basis = scenario.moment_basis
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    if target.moments is not None:
        M = read_moments_csv(base / target.moments)
        if M.basis != basis:
            raise ValueError(f"target moments are {M.basis}, scenario uses {basis}")
        return M
    if target.points is not None:
        return moments_of_points(basis, np.asarray(target.points, dtype=float).reshape(-1, 2))
    if target.image is not None:
        grid = load_density(base / target.image, invert=target.invert)
    else:
        grid = shapes.render(target.shape, target.resolution)
    return moments_of_grid(basis, grid)


def _initial_positions(scenario: Scenario) -> np.ndarray:
    if scenario.initial_positions is not None:
        return np.array(scenario.initial_positions, dtype=float).reshape(-1, 2)
    seed = scenario.position_seed if scenario.position_seed is not None else scenario.seed
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    n = scenario.n_robots
    if scenario.init_shape == "square":
        return rng.uniform(-1.0, 1.0, size=(n, 2))
    radius = scenario.init_radius * np.sqrt(rng.uniform(size=n))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def _build_graph(scenario: Scenario, positions: np.ndarray, alive: np.ndarray) -> Digraph:
    kind, arg = parse_topology(scenario.topology)
    n = positions.shape[0]
    idx = np.flatnonzero(alive)
    adj = np.zeros((n, n), dtype=bool)
    if kind == "all_to_all":
        adj[np.ix_(idx, idx)] = True
    elif kind == "radius":
        adj[np.ix_(idx, idx)] = build_radius_graph(positions[idx], arg).adj
    else:
        adj = from_edges(n, arg).adj & alive[:, None] & alive[None, :]
    np.fill_diagonal(adj, False)
    return Digraph(adj)


def _live_subgraph(state: SimState) -> Digraph:
    idx = state.ids
    return Digraph(state.graph.adj[np.ix_(idx, idx)])


def _check_connectivity(state: SimState, when: str):
    ok = strongly_connected(_live_subgraph(state))
    state.log.add(state.t, "strongly_connected", 1.0 if ok else 0.0)
    if not ok:
        msg = f"communication graph is not strongly connected {when} (t={state.t})"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


def _clip_domain(basis: MomentBasis, positions: np.ndarray) -> np.ndarray:
    if basis.kind is BasisKind.PSEUDO_ZERNIKE:
        r = np.hypot(positions[:, 0], positions[:, 1])
        out = r > PZM_CLIP_RADIUS
        positions = positions.copy()
        positions[out] *= (PZM_CLIP_RADIUS / r[out])[:, None]
        return positions
    return np.clip(positions, -1.0, 1.0)


def init_state(scenario: Scenario, target: MomentVector | None = None, base_dir=None) -> SimState:
    basis = scenario.moment_basis
    if target is None:
        target = resolve_target(scenario, base_dir)
    positions = _clip_domain(basis, _initial_positions(scenario))
    n = positions.shape[0]
    alive = np.ones(n, dtype=bool)
    seq = np.random.SeedSequence(scenario.seed)
    delivery, events, collisions = (np.random.default_rng(s) for s in seq.spawn(3))
    estimator = SwarmEstimator(n, basis.size, scenario.gamma_for(n), scenario.horizon_for(n))
    state = SimState(
        t=0,
        basis=basis,
        target=target,
        gain=scenario.gain_schedule(),
        positions=positions,
        alive=alive,
        graph=_build_graph(scenario, positions, alive),
        estimator=estimator,
        broadcasts=estimator.w.copy(),
        loss=PacketLossModel(scenario.drop_rate, rng=delivery),
        rngs={"delivery": delivery, "events": events, "collisions": collisions},
        log=MetricLog(),
    )
    # robots start out holding their own contribution as the estimate
    state.estimator.estimate[:] = phi_batch(basis, positions)
    _check_connectivity(state, "at start")
    if target is not None:
        state.phase_error0 = (state.true_moments() - target).norm()
    _record(state, scenario)
    return state


def _refresh_parameters(state: SimState, scenario: Scenario):
    n = state.n_alive
    state.estimator.gain = scenario.gamma_for(n)
    state.estimator.horizon = scenario.horizon_for(n)


def add_robots(state: SimState, positions, scenario: Scenario) -> SimState:
    """Append robots with fresh estimator state; returns the same state object."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return state
    if not np.all(np.isfinite(pts)) or np.any(np.abs(pts) > 1.0):
        raise ValueError("added robots must lie inside [-1, 1]^2")
    pts = _clip_domain(state.basis, pts)
    extra = pts.shape[0]
    state.estimator.grow(extra)
    state.positions = np.vstack([state.positions, pts])
    state.alive = np.concatenate([state.alive, np.ones(extra, dtype=bool)])
    state.broadcasts = np.vstack([state.broadcasts, np.zeros((extra, state.basis.size + 1))])
    state.estimator.estimate[-extra:] = phi_batch(state.basis, pts)
    state.invalidate()
    state.graph = _build_graph(scenario, state.positions, state.alive)
    _refresh_parameters(state, scenario)
    return state


def remove_robots(state: SimState, ids, scenario: Scenario) -> SimState:
    ids = np.asarray(ids, dtype=int).reshape(-1)
    if ids.size == 0:
        return state
    if np.any(ids < 0) or np.any(ids >= state.alive.size) or not np.all(state.alive[ids]):
        raise ValueError(f"cannot remove robots {ids.tolist()}: not all are present")
    if np.unique(ids).size >= state.n_alive:
        raise ValueError("cannot remove every robot")
    state.alive[ids] = False
    state.positions[ids] = np.nan
    state.invalidate()
    state.graph = _build_graph(scenario, state.positions, state.alive)
    _refresh_parameters(state, scenario)
    return state


def _in_region(points: np.ndarray, region) -> np.ndarray:
    xmin, xmax, ymin, ymax = region
    return (points[:, 0] >= xmin) & (points[:, 0] <= xmax) & (points[:, 1] >= ymin) & (points[:, 1] <= ymax)


def _apply_event(state: SimState, event: Event, scenario: Scenario):
    rng = state.rngs["events"]
    if event.action == "add":
        if event.positions is not None:
            pts = np.asarray(event.positions, dtype=float).reshape(-1, 2)
        else:
            xmin, xmax, ymin, ymax = event.region or (-1.0, 1.0, -1.0, 1.0)
            pts = np.column_stack([
                rng.uniform(xmin, xmax, event.count),
                rng.uniform(ymin, ymax, event.count),
            ])
        add_robots(state, pts, scenario)
        state.log.add(state.t, "event_add", pts.shape[0])
    else:
        if event.ids is not None:
            ids = np.asarray(event.ids, dtype=int)
        else:
            candidates = state.ids
            if event.region is not None:
                candidates = candidates[_in_region(state.positions[candidates], event.region)]
            if event.count > candidates.size:
                raise ValueError(
                    f"remove event at t={event.iteration} wants {event.count} robots, "
                    f"only {candidates.size} eligible"
                )
            ids = np.sort(rng.choice(candidates, size=event.count, replace=False))
        remove_robots(state, ids, scenario)
        state.log.add(state.t, "event_remove", ids.size)
    state.phase_start = state.t
    state.phase_converged = False
    if state.target is not None:
        state.phase_error0 = (state.true_moments() - state.target).norm()
    _check_connectivity(state, f"after {event.action} event")


def step(state: SimState, scenario: Scenario) -> SimState:
    """Advance the simulation by one synchronous iteration (mutates ``state``)."""
    basis = state.basis
    alive = state.alive
    est = state.estimator
    live = state.ids

    # (1) estimator input from current positions
    u = state.estimator_inputs()

    # (2) delivery of last iteration's broadcasts over the current topology
    delivered = sample_delivery(state.graph, state.loss)

    # (3) push-sum update, (4) broadcast
    est.step(u, delivered, state.broadcasts, state.graph.out_degree, alive)
    state.broadcasts = est.w.copy()

    # (5) control velocity
    if scenario.mode != "estimate_only":
        pts = state.positions[live]
        jacs = phi_jacobian_batch(basis, pts)
        if scenario.mode == "coupled":
            errors = est.estimate[live] - state.target.values
        else:
            errors = state.true_moments().values - state.target.values
        vel = control_velocities(jacs, errors, state.gain)
        # (6) collision filter, saturation, deadband
        params = scenario.control
        vel = vel + collision_velocities(pts, params, state.rngs["collisions"])
        vel = saturate_deadband_batch(vel, params)
        # (7) Euler update
        state.positions[live] = _clip_domain(basis, pts + params.dt * vel)
        state.invalidate()
        # (8) topology follows the robots
        if parse_topology(scenario.topology)[0] == "radius":
            state.graph = _build_graph(scenario, state.positions, state.alive)

    state.t += 1

    # (9) events
    happened = False
    for event in scenario.events:
        if event.iteration == state.t:
            _apply_event(state, event, scenario)
            happened = True

    # (10) metrics
    _record(state, scenario, force=happened)
    return state


def _metrics(state: SimState, scenario: Scenario) -> list[tuple[str, float, int | None]]:
    M = state.true_moments()
    est_err = np.linalg.norm(state.estimates() - M.values, axis=1)
    rows = [("estimate_error_max", est_err.max(), None), ("n_robots", state.n_alive, None)]
    if state.target is not None:
        if "error" not in state.cache:
            state.cache["error"] = ((M - state.target).norm(), msre(M, state.target))
        err, recon = state.cache["error"]
        rows += [("moment_error", err, None), ("msre", recon, None)]
        reference = state.target.values
    else:
        reference = M.values
    trace = scenario.trace_robot
    if 0 <= trace < state.alive.size and state.alive[trace]:
        trace_err = np.linalg.norm(state.estimator.estimate[trace] - reference)
        rows.append(("trace_error", trace_err, trace))
    return rows


def _record(state: SimState, scenario: Scenario, force: bool = False):
    rows = _metrics(state, scenario)
    for metric, value, robot_id in rows:
        if robot_id is None:
            state.history.setdefault(metric, []).append(float(value))
    if force or state.t % scenario.log_every == 0:
        for metric, value, robot_id in rows:
            state.log.add(state.t, metric, value, robot_id)
        state.pending = None
    else:
        state.pending = (state.t, rows)


def _flush(state: SimState):
    """Write the last iteration's metrics if the logging stride skipped them."""
    if state.pending is not None and state.pending[0] == state.t:
        for metric, value, robot_id in state.pending[1]:
            state.log.add(state.t, metric, value, robot_id)
    state.pending = None


def _phase_converged(state: SimState, scenario: Scenario) -> bool:
    if scenario.mode == "estimate_only":
        return state.history["estimate_error_max"][-1] < scenario.convergence_tol
    window = scenario.plateau_window
    if state.t - state.phase_start < window:
        return False
    values = state.history["msre"]
    old, new = values[-window - 1], values[-1]
    flat = abs(new - old) <= scenario.plateau_tol * max(old, 1e-300)
    # a plateau above the starting error (e.g. robots pinned at the walls) is not convergence
    improved = state.history["moment_error"][-1] < state.phase_error0
    return bool(flat and improved)


def run(scenario: Scenario, target: MomentVector | None = None, base_dir=None,
        callback: Callable[[SimState], None] | None = None) -> RunResult:
    """Iterate until the cap or convergence; deterministic for a given seed.

    Convergence means every robot's estimate is within ``convergence_tol`` of
    the true moments (``estimate_only``) or the MSRE has plateaued below its
    starting level (control modes). Runs with pending events continue past
    convergence; every converged phase is recorded.
    """
    state = init_state(scenario, target, base_dir)
    last_event = max((e.iteration for e in scenario.events), default=0)
    while state.t < scenario.iterations:
        step(state, scenario)
        if callback is not None:
            callback(state)
        if not state.phase_converged and _phase_converged(state, scenario):
            state.phase_converged = True
            state.converged_at.append(state.t)
            state.log.add(state.t, "converged", len(state.converged_at))
            log.info("converged at iteration %d", state.t)
            if scenario.stop_on_convergence and state.t >= last_event:
                break
    _flush(state)
    return RunResult(state, state.log, state.phase_converged, list(state.converged_at))
