"""Constraint-satisfaction core for behavior configuration.

Tasks are the variables; each domain is the task's candidate behaviors plus
the inactive value (represented as None). Configuration search is depth-first
backtracking with generalized arc consistency after every assignment,
domain initialization keyed to the triggering event, suitability-driven value
ordering, and deferred evaluation of performance constraints with no-good
learning: during search a task's performance is bounded by the best
suitability left in its domain, and the exact product over required tasks is
only checked once a full candidate exists.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from random import Random

from .catalog import Catalog

# A task's value: the name of the behavior performing it, or None when the
# task is not started.
Value = str | None
INACTIVE: Value = None

DomainTable = dict  # task name -> ordered list of Value
Assignment = dict  # task name -> Value, total over all tasks
NoGood = frozenset  # frozenset of (task, Value) pairs, non-empty

# Absolute tolerance for performance comparisons; products of unit-interval
# suitabilities accumulate rounding but never grow.
PERFORMANCE_TOLERANCE = 1e-9


class TerminationCause(Enum):
    GOAL_ACHIEVED = "GOAL_ACHIEVED"
    TIME_OUT = "TIME_OUT"
    WRONG_PROGRESS = "WRONG_PROGRESS"
    SITUATION_CHANGE = "SITUATION_CHANGE"
    PROCESS_FAILURE = "PROCESS_FAILURE"
    INTERRUPTED = "INTERRUPTED"


# Every cause except GOAL_ACHIEVED ends the behavior without completing the
# task; INTERRUPTED is coordinator-initiated and never re-enters the loop.
FAILURE_CAUSES = frozenset(
    {
        TerminationCause.TIME_OUT,
        TerminationCause.WRONG_PROGRESS,
        TerminationCause.SITUATION_CHANGE,
        TerminationCause.PROCESS_FAILURE,
    }
)


@dataclass(frozen=True)
class StartRequest:
    task: str
    priority: int = 0


@dataclass(frozen=True)
class StopRequest:
    task: str


@dataclass(frozen=True)
class BehaviorFinished:
    behavior: str
    cause: TerminationCause


Trigger = StartRequest | StopRequest | BehaviorFinished


@dataclass
class SolverConfig:
    max_solutions: int = 10
    max_search_time_ms: float = 50.0
    seed: int = 0
    reactive_delay_ms: int = 500

    def __post_init__(self) -> None:
        if self.max_solutions < 1:
            raise ValueError("max_solutions must be >= 1")
        if self.max_search_time_ms <= 0:
            raise ValueError("max_search_time_ms must be positive")


# --- constraints -----------------------------------------------------------


@dataclass(frozen=True)
class Incompatibility:
    """At least one of the two tasks must be inactive."""

    task_a: str
    task_b: str


@dataclass(frozen=True)
class RequirementLink:
    """Choosing `behavior` for `task` forces `required_task` to run.

    A positive min_performance additionally demands the required task's full
    performance stays above the threshold; that part is bounded during search
    and verified exactly on complete candidates.
    """

    task: str
    behavior: str
    required_task: str
    min_performance: float = 0.0


@dataclass(frozen=True)
class PerformanceFloor:
    """Standalone constraint: when `task` runs, its performance is >= threshold."""

    task: str
    threshold: float


Constraint = Incompatibility | RequirementLink | PerformanceFloor


def build_constraints(catalog: Catalog) -> tuple:
    """All constraint objects implied by the catalog, in stable order."""
    cached = getattr(catalog, "_csp_constraints", None)
    if cached is not None:
        return cached
    out: list[Constraint] = []
    for task in catalog.tasks:
        if task.min_performance is not None:
            out.append(PerformanceFloor(task.name, task.min_performance))
    for beh in catalog.behaviors:
        for req in beh.requires:
            out.append(RequirementLink(beh.task, beh.name, req.task, req.min_performance))
    for pair in catalog.incompatibilities:
        out.append(Incompatibility(pair.task_a, pair.task_b))
    result = tuple(out)
    catalog._csp_constraints = result
    return result


def _constraint_variables(constraint: Constraint) -> tuple[str, ...]:
    if isinstance(constraint, Incompatibility):
        return (constraint.task_a, constraint.task_b)
    if isinstance(constraint, RequirementLink):
        return (constraint.task, constraint.required_task)
    return (constraint.task,)


# --- situation feasibility and domain initialization ------------------------


def situation_feasible_set(catalog: Catalog, task: str, situation) -> list:
    """Candidate behaviors of `task` whose situation conditions all hold.

    `situation` is any mapping-like store with .get(); a behavior with no
    conditions is always feasible. Order follows the catalog.
    """
    if task not in catalog.candidates:
        raise KeyError(f"unknown task {task!r}")
    feasible = []
    for beh in catalog.candidates[task]:
        if all(situation.get(cond.key) == cond.value for cond in beh.situation):
            feasible.append(beh.name)
    return feasible


def _trigger_task(catalog: Catalog, trigger: Trigger) -> str:
    if isinstance(trigger, (StartRequest, StopRequest)):
        if trigger.task not in catalog.task_by_name:
            raise KeyError(f"unknown task {trigger.task!r}")
        return trigger.task
    beh = catalog.behavior_by_name.get(trigger.behavior)
    if beh is None:
        raise KeyError(f"unknown behavior {trigger.behavior!r}")
    return beh.task


def initialize_domains(
    catalog: Catalog,
    state,
    trigger: Trigger,
    priority_floor: int | None = None,
) -> DomainTable:
    """Build the initial domain table for one coordination solve.

    The triggering task's domain encodes the event: a start request offers
    exactly the situation-feasible behaviors, a stop forces inactivity, a
    failed behavior is barred from re-selection while a situation change
    allows it again. Tasks outside the trigger's constraint-graph component
    are pinned to their current value, and start-on-request tasks that are
    not running lose all candidates. With a priority floor, running tasks
    whose live request outranks the floor lose the inactive value so the
    solve cannot stop them.
    """
    situation = state.situation
    current = state.current
    trig_task = _trigger_task(catalog, trigger)
    trig_comp = catalog.component_of(trig_task)

    table: DomainTable = {}
    for name in catalog.task_names:
        if name == trig_task:
            feasible = situation_feasible_set(catalog, name, situation)
            if isinstance(trigger, StartRequest):
                domain = list(feasible)
            elif isinstance(trigger, StopRequest):
                domain = [INACTIVE]
            elif trigger.cause is TerminationCause.GOAL_ACHIEVED:
                domain = [INACTIVE]
            elif trigger.cause in (
                TerminationCause.PROCESS_FAILURE,
                TerminationCause.TIME_OUT,
                TerminationCause.WRONG_PROGRESS,
            ):
                domain = [INACTIVE] + [b for b in feasible if b != trigger.behavior]
            else:  # SITUATION_CHANGE, INTERRUPTED: same behavior may be retried
                domain = [INACTIVE] + feasible
        elif catalog.component_of(name) != trig_comp:
            domain = [current.get(name)]
        else:
            spec = catalog.task_by_name[name]
            running = current.get(name) is not None
            if spec.start_on_request and not running:
                domain = [INACTIVE]
            else:
                domain = [INACTIVE] + situation_feasible_set(catalog, name, situation)
        table[name] = domain

    if priority_floor is not None:
        live_priority: dict = {}
        for record in state.requests:
            if record.active:
                live_priority[record.task] = record.priority
        for name in catalog.task_names:
            if name == trig_task or current.get(name) is None:
                continue
            priority = live_priority.get(name)
            if priority is not None and priority > priority_floor:
                table[name] = [v for v in table[name] if v is not None]

    return table


# --- propagation (GAC3) -----------------------------------------------------


def performance_upper_bound(task: str, table: DomainTable, catalog: Catalog) -> float:
    """Best suitability still available for `task`; 0 when only inactivity remains."""
    best = 0.0
    for value in table[task]:
        if value is not None:
            suit = catalog.suitability(value)
            if suit > best:
                best = suit
    return best


def revise_arc(constraint: Constraint, variable: str, table: DomainTable, catalog: Catalog) -> bool:
    """Drop values of `variable` with no support under `constraint`.

    Returns True when the domain changed. Performance-augmented requirement
    links are revised as plain requirements plus an upper-bound check on the
    required task's best remaining suitability.
    """
    domain = table[variable]

    if isinstance(constraint, Incompatibility):
        if variable == constraint.task_a:
            other = constraint.task_b
        elif variable == constraint.task_b:
            other = constraint.task_a
        else:
            raise ValueError(f"{constraint} does not involve {variable!r}")
        # A behavior value is supported only if the other task can be inactive.
        if INACTIVE in table[other]:
            return False
        kept = [v for v in domain if v is None]
        if len(kept) == len(domain):
            return False
        table[variable] = kept
        return True

    if isinstance(constraint, RequirementLink):
        if variable == constraint.task:
            if constraint.behavior not in domain:
                return False
            required = table[constraint.required_task]
            supported = any(v is not None for v in required)
            if supported and constraint.min_performance > 0.0:
                bound = performance_upper_bound(constraint.required_task, table, catalog)
                supported = bound >= constraint.min_performance - PERFORMANCE_TOLERANCE
            if supported:
                return False
            table[variable] = [v for v in domain if v != constraint.behavior]
            return True
        if variable == constraint.required_task:
            if INACTIVE not in domain:
                return False
            # Inactivity is supported unless the dependent task is pinned to
            # the requiring behavior.
            if any(v != constraint.behavior for v in table[constraint.task]):
                return False
            table[variable] = [v for v in domain if v is not None]
            return True
        raise ValueError(f"{constraint} does not involve {variable!r}")

    if isinstance(constraint, PerformanceFloor):
        if variable != constraint.task:
            raise ValueError(f"{constraint} does not involve {variable!r}")
        # A behavior whose own suitability is below the floor can never reach
        # it once required-task factors (all <= 1) are multiplied in.
        kept = [
            v
            for v in domain
            if v is None
            or catalog.suitability(v) >= constraint.threshold - PERFORMANCE_TOLERANCE
        ]
        if len(kept) == len(domain):
            return False
        table[variable] = kept
        return True

    raise TypeError(f"unknown constraint {constraint!r}")


def propagate(
    table: DomainTable,
    constraints,
    catalog: Catalog,
    dirty=None,
) -> bool:
    """Run the arc-revision worklist to fixpoint; False iff a domain empties.

    With `dirty` given, only arcs of constraints touching those variables are
    seeded, which is how the search re-propagates after one assignment.
    """
    arcs_by_var: dict = {}
    all_arcs = []
    for constraint in constraints:
        for var in _constraint_variables(constraint):
            arc = (constraint, var)
            all_arcs.append(arc)
        for var in _constraint_variables(constraint):
            arcs_by_var.setdefault(var, []).append(constraint)

    if dirty is None:
        queue = deque(all_arcs)
    else:
        queue = deque()
        for var in dirty:
            for constraint in arcs_by_var.get(var, ()):
                for target in _constraint_variables(constraint):
                    queue.append((constraint, target))
    enqueued = set(queue)

    while queue:
        constraint, variable = queue.popleft()
        enqueued.discard((constraint, variable))
        if revise_arc(constraint, variable, table, catalog):
            if not table[variable]:
                return False
            for other in arcs_by_var.get(variable, ()):
                for target in _constraint_variables(other):
                    arc = (other, target)
                    if arc not in enqueued:
                        queue.append(arc)
                        enqueued.add(arc)
    return True


# --- performance (full evaluation) ------------------------------------------


def required_set(assignment: Assignment, task: str, catalog: Catalog) -> set:
    """Tasks transitively required by `task` under the assignment's choices.

    Expansion follows the requirement edges of assigned behaviors; a required
    task left inactive is included but contributes no further edges. The task
    itself is never a member.
    """
    out: set = set()
    frontier = [task]
    while frontier:
        name = frontier.pop()
        value = assignment.get(name)
        if value is None:
            continue
        for req in catalog.behavior_by_name[value].requires:
            if req.task != task and req.task not in out:
                out.add(req.task)
                frontier.append(req.task)
    return out


def task_performance(assignment: Assignment, task: str, catalog: Catalog) -> float:
    """Suitability of the task's behavior times those of all required tasks.

    A required task left inactive contributes factor 0. Undefined (raises)
    when the task itself is not running; callers guard.
    """
    value = assignment.get(task)
    if value is None:
        raise ValueError(f"performance undefined: task {task!r} is not running")
    needed = required_set(assignment, task, catalog)
    result = catalog.suitability(value)
    # Multiply in catalog order so identical assignments always produce the
    # bit-identical product.
    for name in catalog.task_names:
        if name in needed:
            member = assignment.get(name)
            result *= 0.0 if member is None else catalog.suitability(member)
    return result


def make_nogood(assignment: Assignment, violated: Constraint, catalog: Catalog) -> NoGood:
    """Forbidden partial assignment for one violated performance constraint.

    Covers the constraint's own task plus its required set under the current
    assignment; any future assignment extending those pairs repeats the same
    performance and is pruned without re-evaluation.
    """
    owner = violated.task
    pairs = {(owner, assignment[owner])}
    for name in required_set(assignment, owner, catalog):
        pairs.add((name, assignment.get(name)))
    return frozenset(pairs)


def _violated_performance_constraints(
    assignment: Assignment, constraints, catalog: Catalog
) -> list:
    """Performance constraints the complete assignment fails, exactly evaluated."""
    violated = []
    for constraint in constraints:
        if isinstance(constraint, PerformanceFloor):
            if assignment.get(constraint.task) is None:
                continue
            perf = task_performance(assignment, constraint.task, catalog)
            if perf < constraint.threshold - PERFORMANCE_TOLERANCE:
                violated.append(constraint)
        elif isinstance(constraint, RequirementLink) and constraint.min_performance > 0.0:
            if assignment.get(constraint.task) != constraint.behavior:
                continue
            if assignment.get(constraint.required_task) is None:
                continue  # the plain requirement part is handled by propagation
            perf = task_performance(assignment, constraint.required_task, catalog)
            if perf < constraint.min_performance - PERFORMANCE_TOLERANCE:
                violated.append(constraint)
    return violated


# --- value ordering ----------------------------------------------------------


def order_values(task: str, table: DomainTable, state, rng: Random) -> list:
    """Domain values of `task`, most promising first.

    Preference order: keep a non-running task inactive; keep the running
    behavior when nothing in the domain beats its suitability; when the
    running behavior was pruned, try the best remaining behavior before
    giving up the task; otherwise lead with the top-suitability behavior,
    breaking exact ties with the solver's random stream. The rest follows by
    descending suitability with inactivity last.
    """
    catalog = state.catalog
    domain = table[task]
    if not domain:
        raise ValueError(f"empty domain for task {task!r}")

    has_inactive = INACTIVE in domain
    behaviors = [v for v in domain if v is not None]
    position = {name: i for i, name in enumerate(catalog.candidate_names(task))}
    behaviors.sort(key=lambda name: (-catalog.suitability(name), position[name]))

    current = state.current.get(task)
    running = current is not None

    if not running and has_inactive:
        return [INACTIVE] + behaviors

    if running and behaviors:
        best_suit = catalog.suitability(behaviors[0])
        if current in domain:
            if catalog.suitability(current) >= best_suit:
                rest = [b for b in behaviors if b != current]
                return [current] + rest + ([INACTIVE] if has_inactive else [])
            # A strictly better behavior exists; fall through to max-suitability.
        else:
            return behaviors + ([INACTIVE] if has_inactive else [])

    if not behaviors:
        return [INACTIVE]

    top_suit = catalog.suitability(behaviors[0])
    top = [b for b in behaviors if catalog.suitability(b) == top_suit]
    first = top[rng.randrange(len(top))] if len(top) > 1 else top[0]
    rest = [b for b in behaviors if b != first]
    return [first] + rest + ([INACTIVE] if has_inactive else [])


# --- search ------------------------------------------------------------------


def _extends_any_nogood(partial: Assignment, nogoods) -> bool:
    for nogood in nogoods:
        for task, value in nogood:
            if task not in partial or partial[task] != value:
                break
        else:
            return True
    return False


def search(
    table: DomainTable,
    config: SolverConfig,
    nogoods: set,
    state,
    rng: Random | None = None,
    deadline: float | None = None,
) -> Assignment | None:
    """Backtracking search for one assignment consistent with every constraint.

    The branching variable is drawn uniformly at random from the unassigned
    tasks (seeded stream), values are tried in `order_values` order, and the
    domain table is re-propagated after every assignment. Nodes extending any
    known no-good are pruned. A complete candidate is accepted only after the
    deferred exact performance check; on violation the corresponding no-good
    is recorded in `nogoods` and the search continues. Returns None when the
    space is exhausted or the time budget runs out.
    """
    catalog = state.catalog
    constraints = build_constraints(catalog)
    if rng is None:
        rng = Random(config.seed)
    if deadline is None:
        deadline = time.monotonic() + config.max_search_time_ms / 1000.0

    work = {task: list(values) for task, values in table.items()}
    if any(not values for values in work.values()):
        return None
    if not propagate(work, constraints, catalog):
        return None

    assignment: Assignment = {}
    timed_out = False

    def dfs(domains: DomainTable) -> Assignment | None:
        nonlocal timed_out
        if time.monotonic() > deadline:
            timed_out = True
            return None

        unassigned = [t for t in catalog.task_names if t not in assignment]
        if not unassigned:
            violated = _violated_performance_constraints(assignment, constraints, catalog)
            if not violated:
                return dict(assignment)
            for constraint in violated:
                nogoods.add(make_nogood(assignment, constraint, catalog))
            return None

        variable = unassigned[rng.randrange(len(unassigned))]
        for value in order_values(variable, domains, state, rng):
            assignment[variable] = value
            if not _extends_any_nogood(assignment, nogoods):
                child = {t: list(vs) for t, vs in domains.items()}
                child[variable] = [value]
                if propagate(child, constraints, catalog, dirty=[variable]):
                    found = dfs(child)
                    if found is not None:
                        return found
            del assignment[variable]
            if timed_out:
                return None
        return None

    return dfs(work)


# --- independent full checker ------------------------------------------------


def check_assignment(assignment: Assignment, catalog: Catalog, situation) -> list:
    """Every violation a complete assignment commits, as human-readable strings.

    Re-derives requirement closures and performance products directly from
    the catalog, sharing nothing with propagation or search, so it can serve
    as the reference validity test for both.
    """
    problems: list[str] = []

    for name in catalog.task_names:
        if name not in assignment:
            problems.append(f"assignment missing task {name!r}")
    for name, value in assignment.items():
        if name not in catalog.task_by_name:
            problems.append(f"assignment names unknown task {name!r}")
        elif value is not None:
            beh = catalog.behavior_by_name.get(value)
            if beh is None or beh.task != name:
                problems.append(f"behavior {value!r} is not a candidate of task {name!r}")
            else:
                for cond in beh.situation:
                    if situation.get(cond.key) != cond.value:
                        problems.append(
                            f"behavior {value!r} infeasible: requires {cond.key}=={cond.value!r}"
                        )

    for pair in catalog.incompatibilities:
        if assignment.get(pair.task_a) is not None and assignment.get(pair.task_b) is not None:
            problems.append(f"incompatible tasks {pair.task_a!r} and {pair.task_b!r} both running")

    def closure(task: str) -> set:
        seen: set = set()
        frontier = [task]
        while frontier:
            node = frontier.pop()
            value = assignment.get(node)
            if value is None:
                continue
            beh = catalog.behavior_by_name.get(value)
            if beh is None:
                continue
            for req in beh.requires:
                if req.task != task and req.task not in seen:
                    seen.add(req.task)
                    frontier.append(req.task)
        return seen

    def performance(task: str) -> float:
        value = assignment.get(task)
        if value is None:
            return 0.0
        product = catalog.behavior_by_name[value].suitability
        needed = closure(task)
        for name in catalog.task_names:
            if name in needed:
                member = assignment.get(name)
                if member is None:
                    product *= 0.0
                else:
                    product *= catalog.behavior_by_name[member].suitability
        return product

    for name, value in assignment.items():
        if value is None:
            continue
        beh = catalog.behavior_by_name.get(value)
        if beh is None or beh.task != name:
            continue
        for req in beh.requires:
            if assignment.get(req.task) is None:
                problems.append(
                    f"behavior {value!r} requires task {req.task!r} which is not running"
                )
            elif req.min_performance > 0.0:
                perf = performance(req.task)
                if perf < req.min_performance - PERFORMANCE_TOLERANCE:
                    problems.append(
                        f"behavior {value!r} requires {req.task!r} at performance "
                        f">= {req.min_performance}, got {perf:.6f}"
                    )

    for task in catalog.tasks:
        if task.min_performance is None or assignment.get(task.name) is None:
            continue
        perf = performance(task.name)
        if perf < task.min_performance - PERFORMANCE_TOLERANCE:
            problems.append(
                f"task {task.name!r} requires performance >= {task.min_performance}, "
                f"got {perf:.6f}"
            )

    return problems
