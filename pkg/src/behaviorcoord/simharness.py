"""Deterministic stand-ins for the per-behavior execution managers.

The harness keeps a key/value situation store, tracks which behaviors are
active, enforces the activation preconditions, fires timeout terminations
from the simulated clock, and translates scripted scenario events into
coordinator triggers. Everything is driven by scenario timestamps; no wall
clock is involved, so replays are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .catalog import Catalog
from .csp import (
    BehaviorFinished,
    StartRequest,
    StopRequest,
    TerminationCause,
    Trigger,
)


class ActivationError(RuntimeError):
    """An activation-interface call that signals a coordination bug."""


class ScenarioError(ValueError):
    """Raised when scenario text cannot be parsed or bound to a catalog."""


class SituationStore:
    """Mutable key/value world model with a timestamped mutation log."""

    def __init__(self, initial=None) -> None:
        self._data: dict = dict(initial or {})
        self.log: list = []

    def get(self, key, default=None):
        return self._data.get(key, default)

    def set(self, key, value, now_ms: int = 0) -> None:
        self._data[key] = value
        self.log.append((now_ms, key, value))

    def snapshot(self) -> dict:
        return dict(self._data)


@dataclass
class ManagedBehavior:
    name: str
    timeout_ms: int | None = None
    active: bool = False
    activation_ms: int | None = None


class ManagerRegistry:
    """Activation lifecycle for every behavior of a catalog."""

    def __init__(self, catalog: Catalog, situation: SituationStore) -> None:
        self.catalog = catalog
        self.situation = situation
        self.managed: dict = {
            beh.name: ManagedBehavior(beh.name, beh.timeout_ms) for beh in catalog.behaviors
        }
        self.interruptions: list = []

    def _get(self, name: str) -> ManagedBehavior:
        managed = self.managed.get(name)
        if managed is None:
            raise KeyError(f"unknown behavior {name!r}")
        return managed

    def activate(self, name: str, now_ms: int) -> None:
        managed = self._get(name)
        if managed.active:
            raise ActivationError(f"behavior {name!r} is already active")
        spec = self.catalog.behavior_by_name[name]
        for cond in spec.situation:
            if self.situation.get(cond.key) != cond.value:
                raise ActivationError(
                    f"behavior {name!r} activated while infeasible "
                    f"({cond.key} != {cond.value!r}); the solve that chose it was inconsistent"
                )
        managed.active = True
        managed.activation_ms = now_ms

    def deactivate(self, name: str) -> None:
        """Coordinator-commanded stop; recorded as INTERRUPTED, not re-queued."""
        managed = self._get(name)
        if not managed.active:
            raise ActivationError(f"behavior {name!r} is not active")
        managed.active = False
        managed.activation_ms = None
        self.interruptions.append(name)

    def mark_terminated(self, name: str) -> None:
        """The behavior ended on its own; idempotent for stale notifications."""
        managed = self._get(name)
        managed.active = False
        managed.activation_ms = None

    def check_activation(self, name: str) -> bool:
        return self._get(name).active

    def active_names(self) -> list:
        return [beh.name for beh in self.catalog.behaviors if self.managed[beh.name].active]

    def poll_timeouts(self, now_ms: int) -> list:
        """TIME_OUT terminations for behaviors active strictly longer than their limit."""
        fired = []
        for beh in self.catalog.behaviors:
            managed = self.managed[beh.name]
            if not managed.active or managed.timeout_ms is None:
                continue
            if now_ms - managed.activation_ms > managed.timeout_ms:
                managed.active = False
                managed.activation_ms = None
                fired.append(BehaviorFinished(beh.name, TerminationCause.TIME_OUT))
        return fired

    def next_timeout_expiry(self) -> int | None:
        expiries = [
            managed.activation_ms + managed.timeout_ms
            for managed in self.managed.values()
            if managed.active and managed.timeout_ms is not None
        ]
        return min(expiries) if expiries else None


def poll_timeouts(registry: ManagerRegistry, now_ms: int) -> list:
    return registry.poll_timeouts(now_ms)


# --- scenarios ---------------------------------------------------------------

_EVENT_KINDS = ("start_task", "stop_task", "behavior_finished", "set_situation")


@dataclass(frozen=True)
class ScenarioEvent:
    at_ms: int
    kind: str
    task: str | None = None
    priority: int = 0
    behavior: str | None = None
    cause: TerminationCause | None = None
    key: str | None = None
    value: object = None


@dataclass(frozen=True)
class Scenario:
    initial_situation: dict
    script: tuple


def _parse_event(entry, index: int) -> ScenarioEvent:
    where = f"script[{index}]"
    if not isinstance(entry, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    if "at" not in entry:
        raise ScenarioError(f"{where}: missing 'at' timestamp")
    at = entry["at"]
    if isinstance(at, bool) or not isinstance(at, (int, float)) or at < 0:
        raise ScenarioError(f"{where}: 'at' must be a non-negative number of seconds")
    at_ms = int(round(float(at) * 1000))

    kinds = [k for k in entry if k in _EVENT_KINDS]
    unknown = [k for k in entry if k not in _EVENT_KINDS and k != "at"]
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    if len(kinds) != 1:
        raise ScenarioError(f"{where}: expected exactly one of {_EVENT_KINDS}")
    kind = kinds[0]
    payload = entry[kind]
    if not isinstance(payload, dict):
        raise ScenarioError(f"{where}.{kind}: expected a mapping")

    if kind == "start_task":
        if set(payload) - {"task", "priority"}:
            raise ScenarioError(f"{where}.start_task: unknown fields")
        task = payload.get("task")
        priority = payload.get("priority", 0)
        if not isinstance(task, str) or not task:
            raise ScenarioError(f"{where}.start_task: missing task name")
        if isinstance(priority, bool) or not isinstance(priority, int) or priority < 0:
            raise ScenarioError(f"{where}.start_task: priority must be a non-negative integer")
        return ScenarioEvent(at_ms, kind, task=task, priority=priority)
    if kind == "stop_task":
        task = payload.get("task")
        if set(payload) - {"task"} or not isinstance(task, str) or not task:
            raise ScenarioError(f"{where}.stop_task: expected {{task: name}}")
        return ScenarioEvent(at_ms, kind, task=task)
    if kind == "behavior_finished":
        if set(payload) - {"behavior", "cause"}:
            raise ScenarioError(f"{where}.behavior_finished: unknown fields")
        behavior = payload.get("behavior")
        cause_name = payload.get("cause")
        if not isinstance(behavior, str) or not behavior:
            raise ScenarioError(f"{where}.behavior_finished: missing behavior name")
        try:
            cause = TerminationCause(cause_name)
        except ValueError as exc:
            raise ScenarioError(
                f"{where}.behavior_finished: unknown cause {cause_name!r}"
            ) from exc
        return ScenarioEvent(at_ms, kind, behavior=behavior, cause=cause)
    # set_situation
    if set(payload) - {"key", "value"}:
        raise ScenarioError(f"{where}.set_situation: unknown fields")
    key = payload.get("key")
    if not isinstance(key, str) or not key:
        raise ScenarioError(f"{where}.set_situation: missing key")
    if "value" not in payload:
        raise ScenarioError(f"{where}.set_situation: missing value")
    return ScenarioEvent(at_ms, kind, key=key, value=payload["value"])


def parse_scenario(text: str) -> Scenario:
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise ScenarioError(
                f"syntax error at line {mark.line + 1}, column {mark.column + 1}"
            ) from exc
        raise ScenarioError(f"syntax error: {exc}") from exc

    if root is None:
        root = {}
    if not isinstance(root, dict) or set(root) - {"initial_situation", "script"}:
        raise ScenarioError("scenario: expected mapping with initial_situation and script")
    initial = root.get("initial_situation") or {}
    if not isinstance(initial, dict):
        raise ScenarioError("initial_situation: expected a mapping")
    script_node = root.get("script") or []
    if not isinstance(script_node, list):
        raise ScenarioError("script: expected a list")
    events = tuple(_parse_event(entry, i) for i, entry in enumerate(script_node))
    return Scenario(dict(initial), events)


def bind_scenario(scenario: Scenario, catalog: Catalog) -> None:
    """Check every name in the script against the catalog; raises ScenarioError."""
    for i, event in enumerate(scenario.script):
        if event.kind in ("start_task", "stop_task") and event.task not in catalog.task_by_name:
            raise ScenarioError(f"script[{i}]: unknown task {event.task!r}")
        if event.kind == "behavior_finished" and event.behavior not in catalog.behavior_by_name:
            raise ScenarioError(f"script[{i}]: unknown behavior {event.behavior!r}")


def apply_scenario_event(state, event: ScenarioEvent) -> list:
    """Turn one scripted event into coordinator triggers.

    A situation mutation also synthesizes a SITUATION_CHANGE termination for
    every active behavior whose condition conjunction fails afterwards, in
    catalog declaration order.
    """
    catalog = state.catalog
    if event.kind == "start_task":
        return [StartRequest(event.task, event.priority)]
    if event.kind == "stop_task":
        return [StopRequest(event.task)]
    if event.kind == "behavior_finished":
        return [BehaviorFinished(event.behavior, event.cause)]

    situation = state.situation
    if hasattr(situation, "set"):
        situation.set(event.key, event.value, state.clock_ms)
    else:
        situation[event.key] = event.value

    triggers = []
    for beh in catalog.behaviors:
        if state.current.get(beh.task) != beh.name:
            continue
        if any(situation.get(cond.key) != cond.value for cond in beh.situation):
            triggers.append(BehaviorFinished(beh.name, TerminationCause.SITUATION_CHANGE))
    return triggers
