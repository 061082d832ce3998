"""Scripted fault injections for the cluster simulator."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import yaml

from j2k.errors import InvalidFaultScript


@dataclass(frozen=True)
class KillPod:
    deployment: str
    count: int = 1


@dataclass(frozen=True)
class FailLiveness:
    deployment: str
    pod_ordinal: int = 0
    duration_ticks: int = 3


@dataclass(frozen=True)
class SetCpu:
    deployment: str
    percent: int


@dataclass(frozen=True)
class TriggerRollingUpdate:
    deployment: str
    new_tag: str


Action = Union[KillPod, FailLiveness, SetCpu, TriggerRollingUpdate]


@dataclass(frozen=True)
class Fault:
    tick: int
    action: Action


# action name -> (class, {yaml field: (type, required)})
_ACTIONS = {
    "KillPod": (KillPod, {"count": (int, False)}),
    "FailLiveness": (FailLiveness, {"pod_ordinal": (int, False), "duration_ticks": (int, False)}),
    "SetCpu": (SetCpu, {"percent": (int, True)}),
    "TriggerRollingUpdate": (TriggerRollingUpdate, {"new_tag": (str, True)}),
}


def validate_faults(faults: list[Fault]) -> list[Fault]:
    last = 0
    for i, fault in enumerate(faults):
        if fault.tick < 0:
            raise InvalidFaultScript(f"fault {i}: tick must be non-negative")
        if fault.tick < last:
            raise InvalidFaultScript(f"fault {i}: ticks must be non-decreasing ({fault.tick} after {last})")
        last = fault.tick
    return faults


def faults_from_data(data) -> list[Fault]:
    if data is None:
        return []
    if not isinstance(data, list):
        raise InvalidFaultScript("fault script must be a YAML list")
    faults = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise InvalidFaultScript(f"fault {i}: expected a mapping")
        name = entry.get("action")
        if name not in _ACTIONS:
            raise InvalidFaultScript(f"fault {i}: unknown action {name!r}; expected one of {', '.join(_ACTIONS)}")
        cls, spec = _ACTIONS[name]
        tick = entry.get("tick")
        deployment = entry.get("deployment")
        if not isinstance(tick, int) or isinstance(tick, bool):
            raise InvalidFaultScript(f"fault {i}: 'tick' must be an integer")
        if not isinstance(deployment, str) or not deployment:
            raise InvalidFaultScript(f"fault {i}: 'deployment' is required")
        unknown = set(entry) - {"tick", "action", "deployment"} - set(spec)
        if unknown:
            raise InvalidFaultScript(f"fault {i}: unexpected fields for {name}: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, (typ, required) in spec.items():
            if key not in entry:
                if required:
                    raise InvalidFaultScript(f"fault {i}: {name} requires '{key}'")
                continue
            value = entry[key]
            if typ is int and (not isinstance(value, int) or isinstance(value, bool) or value < 0):
                raise InvalidFaultScript(f"fault {i}: '{key}' must be a non-negative integer")
            if typ is str:
                value = str(value)
            kwargs[key] = value
        faults.append(Fault(tick, cls(deployment=deployment, **kwargs)))
    return validate_faults(faults)


def load_fault_script(path: str | Path) -> list[Fault]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidFaultScript(f"cannot read fault script {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidFaultScript(f"fault script {path} is not valid YAML: {exc}") from None
    return faults_from_data(data)


def faults_to_data(faults: list[Fault]) -> list[dict]:
    out = []
    for fault in faults:
        entry = {"tick": fault.tick, "action": type(fault.action).__name__}
        entry.update(vars(fault.action))
        out.append(entry)
    return out
