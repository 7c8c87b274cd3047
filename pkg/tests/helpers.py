"""Shared builders for solver tests: tiny catalogs and random instances."""

from __future__ import annotations

import math
from random import Random

from behaviorcoord.catalog import (
    BehaviorSpec,
    Catalog,
    CompatibilityConstraint,
    Requirement,
    SituationCondition,
    TaskSpec,
)
from behaviorcoord.coordinator import new_state
from behaviorcoord.csp import (
    BehaviorFinished,
    INACTIVE,
    SolverConfig,
    StartRequest,
    StopRequest,
    TerminationCause,
    check_assignment,
)
from behaviorcoord.optimizer import RequestRecord
from behaviorcoord.simharness import SituationStore

MINI_YAML = """
tasks:
  - name: A
    start_on_request: true
  - name: B
behaviors:
  - name: a1
    task: A
    suitability: 1.0
    requires:
      - {task: B}
  - name: a2
    task: A
    suitability: 0.6
  - name: b1
    task: B
    suitability: 1.0
"""

SUITABILITIES = (0.3, 0.5, 0.6, 0.8, 0.9, 1.0)
THRESHOLDS = (0.5, 0.7, 0.9)


def domain_product(table) -> int:
    return math.prod(len(values) for values in table.values())


def random_catalog(rng: Random, max_tasks: int = 6, max_behaviors: int = 3) -> Catalog:
    """Layered random catalog: behaviors of task i require only later tasks."""
    n = rng.randint(2, max_tasks)
    names = [f"T{i}" for i in range(n)]

    tasks = []
    for name in names:
        start_on_request = rng.random() < 0.2
        reactive = (not start_on_request) and rng.random() < 0.2
        min_perf = rng.choice((0.3, 0.5, 0.8)) if rng.random() < 0.2 else None
        tasks.append(TaskSpec(name, start_on_request, reactive, min_perf))

    behaviors = []
    for i, tname in enumerate(names):
        for j in range(rng.randint(0, max_behaviors)):
            later = names[i + 1 :]
            requires = []
            if later and rng.random() < 0.6:
                picked = rng.sample(later, rng.randint(1, min(2, len(later))))
                for rt in sorted(picked):
                    threshold = rng.choice(THRESHOLDS) if rng.random() < 0.4 else 0.0
                    requires.append(Requirement(rt, threshold))
            situation = ()
            if rng.random() < 0.3:
                situation = (
                    SituationCondition(f"k{rng.randint(0, 2)}", rng.random() < 0.5),
                )
            behaviors.append(
                BehaviorSpec(
                    name=f"{tname}b{j}",
                    task=tname,
                    suitability=rng.choice(SUITABILITIES),
                    situation=situation,
                    requires=tuple(requires),
                )
            )

    incompatibilities = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < 0.15:
                incompatibilities.append(
                    CompatibilityConstraint.normalized(names[a], names[b])
                )

    return Catalog(tuple(tasks), tuple(behaviors), tuple(incompatibilities))


def random_situation(rng: Random) -> SituationStore:
    return SituationStore({f"k{i}": rng.random() < 0.5 for i in range(3)})


def random_valid_current(catalog: Catalog, situation, rng: Random) -> dict:
    """A consistent assignment sampled by rejection; falls back to all-inactive."""
    for _ in range(40):
        candidate = {}
        for name in catalog.task_names:
            options = [INACTIVE] + [
                beh.name
                for beh in catalog.candidates[name]
                if all(situation.get(c.key) == c.value for c in beh.situation)
            ]
            candidate[name] = options[rng.randrange(len(options))]
        if not check_assignment(candidate, catalog, situation):
            return candidate
    return {name: INACTIVE for name in catalog.task_names}


def random_instance(seed: int, config: SolverConfig | None = None):
    """Catalog, populated state, and a random trigger ready for one solve.

    The trigger's pre-solve bookkeeping (record updates, marking a finished
    behavior's task inactive) is already applied, mirroring the coordinator;
    the returned floor is the priority filter the coordinator would use.
    """
    rng = Random(seed)
    catalog = random_catalog(rng)
    situation = random_situation(rng)
    state = new_state(
        catalog,
        config or SolverConfig(max_search_time_ms=10_000.0, seed=seed),
        situation=situation,
    )

    if rng.random() < 0.5:
        state.current = random_valid_current(catalog, situation, rng)

    for name in catalog.task_names:
        running = state.current.get(name) is not None
        if (running and rng.random() < 0.6) or (not running and rng.random() < 0.2):
            state.sequence += 1
            state.requests.append(
                RequestRecord(name, rng.randint(0, 3), state.sequence)
            )

    running_behaviors = [v for v in state.current.values() if v is not None]
    roll = rng.random()
    if roll < 0.4 or not running_behaviors:
        task = catalog.task_names[rng.randrange(len(catalog.task_names))]
        trigger = StartRequest(task, rng.randint(0, 3))
    elif roll < 0.6:
        task = catalog.task_names[rng.randrange(len(catalog.task_names))]
        trigger = StopRequest(task)
    else:
        behavior = running_behaviors[rng.randrange(len(running_behaviors))]
        causes = list(TerminationCause)
        causes.remove(TerminationCause.INTERRUPTED)
        trigger = BehaviorFinished(behavior, causes[rng.randrange(len(causes))])

    floor = apply_pre_solve(state, trigger)
    return catalog, state, trigger, floor


def apply_pre_solve(state, trigger) -> int | None:
    """Record and assignment bookkeeping the coordinator does before solving."""
    catalog = state.catalog
    if isinstance(trigger, StartRequest):
        for record in state.requests:
            if record.active and record.task == trigger.task:
                record.active = False
        state.sequence += 1
        state.requests.append(RequestRecord(trigger.task, trigger.priority, state.sequence))
        return trigger.priority
    if isinstance(trigger, StopRequest):
        for record in state.requests:
            if record.active and record.task == trigger.task:
                record.active = False
        return None
    task = catalog.behavior_by_name[trigger.behavior].task
    state.current[task] = INACTIVE
    live = next(
        (r for r in reversed(state.requests) if r.active and r.task == task), None
    )
    if trigger.cause is TerminationCause.GOAL_ACHIEVED:
        if live is not None:
            live.active = False
        return None
    return live.priority if live is not None else None
