"""Lexicographic multi-objective selection over repeated searches.

Candidates are enumerated by re-running search, excluding each found solution
with a full-assignment no-good so the next run must produce a different one.
The best candidate maximizes, in strict order: the ratio of satisfied live
requests, the suitability product of active behaviors, the inactivity ratio
over tasks that can start without a request, and a penalty that shrinks with
the number of behavior activations and deactivations the candidate implies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from random import Random

from .csp import Assignment, DomainTable, SolverConfig, search


@dataclass(frozen=True, order=True)
class ObjectiveVector:
    """Comparison is lexicographic in declaration order."""

    satisfied_requests: float
    suitability_product: float
    inactivity: float
    change_penalty: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (
            self.satisfied_requests,
            self.suitability_product,
            self.inactivity,
            self.change_penalty,
        )


@dataclass
class RequestRecord:
    """One task request; a newer request for the same task supersedes the older."""

    task: str
    priority: int
    sequence: int
    active: bool = True
    outcome: str | None = None


def count_changes(old: Assignment, new: Assignment, catalog) -> int:
    """Behavior-level activations plus deactivations; a switch counts two."""
    changes = 0
    for name in catalog.task_names:
        before = old.get(name)
        after = new.get(name)
        if before == after:
            continue
        if before is not None:
            changes += 1
        if after is not None:
            changes += 1
    return changes


def objective_vector(candidate: Assignment, state) -> ObjectiveVector:
    catalog = state.catalog

    live = [record for record in state.requests if record.active]
    if live:
        satisfied = sum(1 for record in live if candidate.get(record.task) is not None)
        f1 = satisfied / len(live)
    else:
        f1 = 1.0

    f2 = 1.0
    for name in catalog.task_names:
        value = candidate.get(name)
        if value is not None:
            f2 *= catalog.suitability(value)

    startable = [task for task in catalog.tasks if not task.start_on_request]
    if startable:
        running = sum(1 for task in startable if candidate.get(task.name) is not None)
        f3 = (len(startable) - running) / len(startable)
    else:
        f3 = 1.0

    f4 = 1.0 / (1.0 + count_changes(state.current, candidate, catalog))
    return ObjectiveVector(f1, f2, f3, f4)


def solve_optimal(
    table: DomainTable,
    state,
    config: SolverConfig,
    rng: Random | None = None,
    deadline: float | None = None,
) -> tuple[Assignment, ObjectiveVector] | None:
    """Best assignment over up to max_solutions searches, or None.

    Each found solution is added as a no-good before the next search, so
    repeats enumerate distinct solutions until the space or the budget is
    exhausted. Performance no-goods learned inside one search carry over to
    the following repeats of this call only. Exact vector ties keep the
    earlier find, which the ordering heuristics bias toward the status quo.
    """
    if rng is None:
        rng = Random(config.seed)
    if deadline is None:
        deadline = time.monotonic() + config.max_search_time_ms / 1000.0

    nogoods: set = set()
    best: Assignment | None = None
    best_vector: ObjectiveVector | None = None

    for _ in range(config.max_solutions):
        found = search(table, config, nogoods, state, rng=rng, deadline=deadline)
        if found is None:
            break
        vector = objective_vector(found, state)
        if best_vector is None or vector > best_vector:
            best, best_vector = found, vector
        nogoods.add(frozenset(found.items()))
        if time.monotonic() > deadline:
            break

    if best is None or best_vector is None:
        return None
    return best, best_vector
