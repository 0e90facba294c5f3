"""JSON scenario files.

A config is a JSON object whose keys are :class:`~swarmmoments.swarmsim.Scenario`
fields. ``target``, ``control`` and each entry of ``events`` are nested
objects with the fields of :class:`Target`, :class:`ControlParams` and
:class:`Event`. Missing keys take the dataclass defaults; unknown keys are
errors. ``"v_max": null`` means no speed cap. Relative image and moment paths
in ``target`` are resolved against the config file's directory.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

from .controller import ControlParams
from .swarmsim import Event, Scenario, Target

__all__ = ["ConfigError", "scenario_from_dict", "scenario_to_dict", "load_scenario", "save_scenario"]


class ConfigError(ValueError):
    """Invalid scenario document; the message names the offending field."""


_NUMBER = (int, float)
# expected JSON types for scalar fields; anything not listed is free-form
_TYPES = {
    "n_robots": int, "order": int, "iterations": int, "seed": int, "position_seed": (int, type(None)),
    "forget_horizon": (int, type(None)), "trace_robot": int, "plateau_window": int, "log_every": int,
    "iteration": int, "count": (int, type(None)), "resolution": int,
    "basis": str, "mode": str, "init_shape": str, "name": str, "action": str,
    "shape": (str, type(None)), "image": (str, type(None)), "moments": (str, type(None)),
    "memory": bool, "stop_on_convergence": bool, "invert": bool,
    "drop_rate": _NUMBER, "gamma": (*_NUMBER, type(None)), "gamma_scale": _NUMBER, "beta": _NUMBER,
    "gain_scale": _NUMBER, "init_radius": _NUMBER, "convergence_tol": _NUMBER, "plateau_tol": _NUMBER,
    "v_max": (*_NUMBER, type(None)), "v_min": _NUMBER, "r1": _NUMBER, "r2": _NUMBER, "r3": _NUMBER,
    "k1": (*_NUMBER, type(None)), "k2": (*_NUMBER, type(None)), "k3": (*_NUMBER, type(None)),
    "dt": _NUMBER,
}


def _check_keys(data, cls, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    for key, value in data.items():
        path = f"{where}.{key}" if where else key
        if key not in names:
            raise ConfigError(f"{path}: unknown key (allowed: {', '.join(sorted(names))})")
        expected = _TYPES.get(key)
        # bool is an int subclass; never accept it for a numeric field
        bad_bool = isinstance(value, bool) and expected is not bool and bool not in (
            expected if isinstance(expected, tuple) else (expected,))
        if expected is not None and (bad_bool or not isinstance(value, expected)):
            raise ConfigError(f"{path}: unexpected value {value!r}")


def _build(cls, data: dict, where: str):
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def scenario_from_dict(data: dict) -> Scenario:
    """Validate a parsed config document and build the scenario."""
    _check_keys(data, Scenario, "")
    data = dict(data)
    if data.get("target") is not None:
        _check_keys(data["target"], Target, "target")
        data["target"] = _build(Target, data["target"], "target")
    if "control" in data:
        control = dict(data["control"]) if isinstance(data["control"], dict) else data["control"]
        _check_keys(control, ControlParams, "control")
        if "v_max" in control and control["v_max"] is None:
            control["v_max"] = math.inf
        data["control"] = _build(ControlParams, control, "control")
    if "events" in data:
        if not isinstance(data["events"], list):
            raise ConfigError("events: expected a list")
        events = []
        for i, item in enumerate(data["events"]):
            _check_keys(item, Event, f"events[{i}]")
            events.append(_build(Event, item, f"events[{i}]"))
        data["events"] = events
    return _build(Scenario, data, "")


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`scenario_from_dict`; an infinite speed cap becomes ``null``."""
    out = dataclasses.asdict(scenario)
    if math.isinf(out["control"]["v_max"]):
        out["control"]["v_max"] = None
    return out


def load_scenario(path) -> tuple[Scenario, Path]:
    """Read a config file; returns the scenario and the directory paths resolve against."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data), path.parent


def save_scenario(scenario: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
