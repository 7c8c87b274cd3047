"""Executive loop: consume events, solve, and diff into ordered activations.

One coordination cycle turns task requests and behavior terminations into a
new consistent configuration. The cycle owns all mutable state: the committed
assignment, the request records that feed the satisfied-request objective,
and the delayed-start queue for reactive tasks. Changes are applied to the
execution managers as ordered deactivations and activations, dependents
always going down before the tasks they require and coming up after them.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

from .catalog import Catalog, requirement_topo_order
from .csp import (
    INACTIVE,
    Assignment,
    BehaviorFinished,
    SolverConfig,
    StartRequest,
    StopRequest,
    TerminationCause,
    Trigger,
    _trigger_task,
    initialize_domains,
    situation_feasible_set,
)
from .optimizer import ObjectiveVector, RequestRecord, objective_vector, solve_optimal
from .simharness import ScenarioEvent, apply_scenario_event

CROSS_CHECK_CAP = 100_000
CROSS_CHECK_BUDGET_MS = 5_000.0


class OracleMismatch(RuntimeError):
    """Cross-check mode found the solver disagreeing with the enumeration oracle."""


@dataclass
class QueueEntry:
    task: str
    due_ms: int


@dataclass
class DeltaEntry:
    behavior: str
    task: str
    priority: int
    success: bool = True


@dataclass
class ActivationDelta:
    """Ordered behavior changes produced by one coordination solve."""

    deactivations: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    solved: bool = True
    stale: bool = False
    priority: int = 0
    trigger: Trigger | None = None
    time_ms: int = 0
    vector: ObjectiveVector | None = None

    @property
    def empty(self) -> bool:
        return not self.deactivations and not self.activations

    def change_count(self) -> int:
        return len(self.deactivations) + len(self.activations)


@dataclass
class CoordinatorState:
    catalog: Catalog
    config: SolverConfig
    current: Assignment
    requests: list = field(default_factory=list)
    reactive_queue: list = field(default_factory=list)
    situation: object = field(default_factory=dict)
    clock_ms: int = 0
    managers: object = None
    sequence: int = 0
    solve_times_ms: list = field(default_factory=list)
    cross_check: bool = False


def new_state(
    catalog: Catalog,
    config: SolverConfig | None = None,
    situation=None,
    managers=None,
    cross_check: bool = False,
) -> CoordinatorState:
    """Fresh coordinator state with every reactive task queued for bootstrap."""
    config = config or SolverConfig()
    state = CoordinatorState(
        catalog=catalog,
        config=config,
        current={name: INACTIVE for name in catalog.task_names},
        situation=situation if situation is not None else {},
        managers=managers,
        cross_check=cross_check,
    )
    for task in catalog.reactive_tasks():
        state.reactive_queue.append(QueueEntry(task, state.clock_ms + config.reactive_delay_ms))
    return state


def reactive_incompatibility_sets(catalog: Catalog) -> dict:
    """For each task, the reactive-start tasks it is incompatible with."""
    cached = getattr(catalog, "_reactive_sets", None)
    if cached is not None:
        return cached
    sets = {}
    for name in catalog.task_names:
        members = tuple(
            other
            for other in catalog.incompatible_with(name)
            if other in catalog.task_by_name and catalog.task_by_name[other].reactive_start
        )
        sets[name] = members
    catalog._reactive_sets = sets
    return sets


def _topo_index(catalog: Catalog) -> dict:
    cached = getattr(catalog, "_topo_index", None)
    if cached is None:
        order = requirement_topo_order(catalog)
        cached = {name: i for i, name in enumerate(order)}
        catalog._topo_index = cached
    return cached


def diff_assignments(
    old: Assignment,
    new: Assignment,
    catalog: Catalog,
    priority: int = 0,
    success: bool = True,
) -> ActivationDelta:
    """Behavior changes taking `old` to `new`, in dependency-safe order.

    Deactivations list dependents before the tasks they require; activations
    list required tasks first. A task switching behaviors contributes one
    entry to each list.
    """
    index = _topo_index(catalog)
    deactivations = []
    activations = []
    for name in catalog.task_names:
        before = old.get(name)
        after = new.get(name)
        if before == after:
            continue
        if before is not None:
            deactivations.append((name, before))
        if after is not None:
            activations.append((name, after))
    activations.sort(key=lambda pair: index[pair[0]])
    deactivations.sort(key=lambda pair: -index[pair[0]])
    return ActivationDelta(
        deactivations=[DeltaEntry(b, t, priority, success) for t, b in deactivations],
        activations=[DeltaEntry(b, t, priority, success) for t, b in activations],
        priority=priority,
    )


def update_reactive_queue(state: CoordinatorState, started_tasks, finished_tasks, now_ms: int) -> list:
    """New delayed-start queue after this cycle's task starts and finishes.

    Finishing a task schedules every reactive task incompatible with it at
    now + delay (replacing an older entry); starting a task cancels pending
    entries for the reactive tasks it is incompatible with.
    """
    sets = reactive_incompatibility_sets(state.catalog)
    queue = list(state.reactive_queue)
    delay = state.config.reactive_delay_ms

    for task in finished_tasks:
        for member in sets.get(task, ()):
            queue = [entry for entry in queue if entry.task != member]
            queue.append(QueueEntry(member, now_ms + delay))
    for task in started_tasks:
        for member in sets.get(task, ()):
            queue = [entry for entry in queue if entry.task != member]
    return queue


def _active_record(state: CoordinatorState, task: str) -> RequestRecord | None:
    for record in reversed(state.requests):
        if record.active and record.task == task:
            return record
    return None


def _timed_solve(state: CoordinatorState, table) -> tuple[Assignment, ObjectiveVector] | None:
    """One optimizing solve with wall-time bookkeeping and optional cross-check."""
    config = state.config
    if state.cross_check:
        result = _cross_checked_solve(state, table)
    else:
        started = time.perf_counter()
        result = solve_optimal(table, state, config)
        state.solve_times_ms.append((time.perf_counter() - started) * 1000.0)
    return result


def _cross_checked_solve(state: CoordinatorState, table):
    from .oracle import enumerate_optimal

    import math

    config = state.config
    product = math.prod(len(values) for values in table.values())
    if product > CROSS_CHECK_CAP:
        started = time.perf_counter()
        result = solve_optimal(table, state, config)
        state.solve_times_ms.append((time.perf_counter() - started) * 1000.0)
        return result

    # Equivalence with the oracle needs exhaustive enumeration, so the
    # solution limit is raised to the domain product and the budget relaxed.
    effective = dataclasses.replace(
        config,
        max_solutions=max(config.max_solutions, product),
        max_search_time_ms=max(config.max_search_time_ms, CROSS_CHECK_BUDGET_MS),
    )
    started = time.perf_counter()
    result = solve_optimal(table, state, effective)
    state.solve_times_ms.append((time.perf_counter() - started) * 1000.0)

    reference = enumerate_optimal(table, state, cap=CROSS_CHECK_CAP)
    if result is None:
        if reference.best is not None:
            raise OracleMismatch(
                f"solver found no solution but oracle found {reference.valid_count} "
                f"valid assignments, best vector {reference.best_vector}"
            )
    else:
        if reference.best_vector is None:
            raise OracleMismatch("solver returned a solution but oracle found none valid")
        if result[1] != reference.best_vector:
            raise OracleMismatch(
                f"objective mismatch: solver {result[1]} vs oracle {reference.best_vector}"
            )
    return result


def solve_with_escalation(state: CoordinatorState, trigger: Trigger):
    """Retry the solve with a rising priority floor until something works.

    Used when a behavior fails on a task nobody requested: each pass protects
    only the running tasks requested above the floor, so the first success
    stops nothing requested higher than necessary. A final pass runs with no
    protection at all.
    """
    catalog = state.catalog
    top = 0
    for record in state.requests:
        if record.active and record.priority > top:
            top = record.priority
    for floor in range(0, top + 1):
        table = initialize_domains(catalog, state, trigger, priority_floor=floor)
        result = _timed_solve(state, table)
        if result is not None:
            return result
    table = initialize_domains(catalog, state, trigger, priority_floor=None)
    return _timed_solve(state, table)


def _apply_delta(state: CoordinatorState, delta: ActivationDelta) -> None:
    managers = state.managers
    if managers is None:
        return
    for entry in delta.deactivations:
        managers.deactivate(entry.behavior)
    for entry in delta.activations:
        managers.activate(entry.behavior, state.clock_ms)


def _safety_fallback(state: CoordinatorState, event: Trigger, priority: int) -> ActivationDelta:
    """No consistent configuration exists: tear down broken requirement chains.

    Deactivates every behavior whose required tasks are (transitively) no
    longer running, never leaving a behavior active with unmet requirements.
    """
    catalog = state.catalog
    working = dict(state.current)
    if isinstance(event, StopRequest):
        working[event.task] = INACTIVE

    changed = True
    while changed:
        changed = False
        for name in catalog.task_names:
            value = working.get(name)
            if value is None:
                continue
            behavior = catalog.behavior_by_name[value]
            for req in behavior.requires:
                if working.get(req.task) is None:
                    working[name] = INACTIVE
                    changed = True
                    break

    delta = diff_assignments(state.current, working, catalog, priority=priority, success=False)
    _apply_delta(state, delta)
    state.current = working
    delta.solved = False
    return delta


def handle_event(state: CoordinatorState, event: Trigger) -> tuple[CoordinatorState, ActivationDelta]:
    """Process one trigger: update records, solve, commit, apply, queue.

    Returns the state (mutated in place) and the ordered activation delta;
    a solve failure falls back to tearing down broken chains and marking the
    affected requests failed.
    """
    catalog = state.catalog
    task = _trigger_task(catalog, event)
    pre_running = {name for name, value in state.current.items() if value is not None}

    floor: int | None = None
    escalate = False
    label_priority = 0

    if isinstance(event, StartRequest):
        previous = _active_record(state, event.task)
        if previous is not None:
            previous.active = False
            previous.outcome = "superseded"
        state.sequence += 1
        state.requests.append(RequestRecord(event.task, event.priority, state.sequence))
        floor = event.priority
        label_priority = event.priority
    elif isinstance(event, StopRequest):
        record = _active_record(state, event.task)
        if record is not None:
            label_priority = record.priority
            record.active = False
            record.outcome = "stopped"
        floor = None
    else:
        if state.current.get(task) != event.behavior:
            # The behavior already left the configuration (for example the
            # coordinator interrupted it earlier this cycle); nothing to do.
            delta = ActivationDelta(stale=True, trigger=event, time_ms=state.clock_ms)
            return state, delta
        state.current[task] = INACTIVE
        if state.managers is not None:
            state.managers.mark_terminated(event.behavior)
        record = _active_record(state, task)
        if record is not None:
            label_priority = record.priority
        if event.cause is TerminationCause.GOAL_ACHIEVED:
            if record is not None:
                record.active = False
                record.outcome = "succeeded"
            floor = None
        elif record is not None:
            floor = record.priority
        else:
            escalate = True

    if escalate:
        result = solve_with_escalation(state, event)
    else:
        table = initialize_domains(catalog, state, event, priority_floor=floor)
        result = _timed_solve(state, table)

    if result is not None:
        assignment = result[0]
        delta = diff_assignments(state.current, assignment, catalog, priority=label_priority)
        _apply_delta(state, delta)
        state.current = {name: assignment[name] for name in catalog.task_names}
        delta.vector = result[1]
    else:
        delta = _safety_fallback(state, event, label_priority)

    # A request dies with its task: any transition to inactive retires the
    # record, otherwise the satisfied-request objective would restart reactive
    # tasks instantly and bypass the delayed-start queue.
    for name in catalog.task_names:
        if name in pre_running and state.current.get(name) is None:
            record = _active_record(state, name)
            if record is not None:
                record.active = False
                record.outcome = "stopped" if result is not None else "failed"
    if result is None and isinstance(event, StartRequest):
        record = _active_record(state, event.task)
        if record is not None and state.current.get(event.task) is None:
            record.active = False
            record.outcome = "failed"

    started = [
        name
        for name in catalog.task_names
        if name not in pre_running and state.current.get(name) is not None
    ]
    finished = [
        name
        for name in catalog.task_names
        if name in pre_running and state.current.get(name) is None
    ]
    state.reactive_queue = update_reactive_queue(state, started, finished, state.clock_ms)

    delta.solved = result is not None
    delta.trigger = event
    delta.time_ms = state.clock_ms
    return state, delta


def run_cycle(state: CoordinatorState, events, now_ms: int) -> tuple[CoordinatorState, list]:
    """One coordination cycle at simulated time now_ms.

    Synthesizes timeout terminations first, then processes the given events
    in order (scenario events are applied to the world and expanded into
    triggers on the spot), and finally pops every due entry of the delayed
    reactive-start queue, starting tasks that are still feasible and not
    running at the minimum priority. Returns the activation deltas in order.
    """
    state.clock_ms = now_ms
    deltas = []

    if state.managers is not None:
        for trigger in state.managers.poll_timeouts(now_ms):
            _, delta = handle_event(state, trigger)
            deltas.append(delta)

    for event in events:
        if isinstance(event, ScenarioEvent):
            triggers = apply_scenario_event(state, event)
        else:
            triggers = [event]
        for trigger in triggers:
            _, delta = handle_event(state, trigger)
            deltas.append(delta)

    while True:
        entry = next((e for e in state.reactive_queue if e.due_ms <= now_ms), None)
        if entry is None:
            break
        state.reactive_queue.remove(entry)
        if state.current.get(entry.task) is not None:
            continue
        if not situation_feasible_set(state.catalog, entry.task, state.situation):
            continue
        _, delta = handle_event(state, StartRequest(entry.task, 0))
        deltas.append(delta)

    return state, deltas
