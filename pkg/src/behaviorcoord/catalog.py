"""Behavior catalog: the immutable model of tasks, behaviors and constraints.

A catalog declares what the robot can do (tasks), how each task can be done
(behaviors with a suitability degree in [0, 1]), and the rules that couple
them: incompatibility pairs, requirement edges from a behavior to the tasks
it needs, and minimum-performance thresholds. The catalog is loaded once from
YAML, indexed, and shared read-only by the solver and the coordinator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

Scalar = bool | int | float | str


class CatalogError(ValueError):
    """Raised when catalog text cannot be parsed into a usable model."""


@dataclass(frozen=True)
class SituationCondition:
    """One key == value condition that must hold for a behavior to be activatable."""

    key: str
    value: Scalar


@dataclass(frozen=True)
class Requirement:
    """A task this behavior needs running, optionally above a performance threshold."""

    task: str
    min_performance: float = 0.0


@dataclass(frozen=True)
class TaskSpec:
    name: str
    start_on_request: bool = False
    reactive_start: bool = False
    min_performance: float | None = None


@dataclass(frozen=True)
class BehaviorSpec:
    name: str
    task: str
    suitability: float
    timeout_ms: int | None = None
    situation: tuple[SituationCondition, ...] = ()
    requires: tuple[Requirement, ...] = ()


@dataclass(frozen=True)
class CompatibilityConstraint:
    """Two tasks that must not run at the same time; stored as a sorted pair."""

    task_a: str
    task_b: str

    @staticmethod
    def normalized(a: str, b: str) -> "CompatibilityConstraint":
        lo, hi = sorted((a, b))
        return CompatibilityConstraint(lo, hi)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


ValidationReport = list  # list[Violation]


class Catalog:
    """Indexed, immutable view over task and behavior declarations.

    Lookups used on the hot path (candidates per task, behavior by name,
    connected components of the constraint graph) are precomputed here.
    Construction never raises on semantic problems; ``validate_catalog``
    reports them and ``parse_catalog(strict=True)`` turns them into errors.
    """

    def __init__(
        self,
        tasks: tuple[TaskSpec, ...],
        behaviors: tuple[BehaviorSpec, ...],
        incompatibilities: tuple[CompatibilityConstraint, ...],
    ) -> None:
        self.tasks = tasks
        self.behaviors = behaviors
        self.incompatibilities = incompatibilities

        self.task_by_name: dict[str, TaskSpec] = {t.name: t for t in tasks}
        self.behavior_by_name: dict[str, BehaviorSpec] = {b.name: b for b in behaviors}
        self.task_names: tuple[str, ...] = tuple(t.name for t in tasks)

        # Candidate behaviors per task, in declaration order. The inactive
        # value is implicit and never stored here.
        self.candidates: dict[str, tuple[BehaviorSpec, ...]] = {
            t.name: tuple(b for b in behaviors if b.task == t.name) for t in tasks
        }

        self._components = _connected_components(self)
        self._component_of: dict[str, int] = {}
        for idx, comp in enumerate(self._components):
            for name in comp:
                self._component_of[name] = idx

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return (
            self.tasks == other.tasks
            and self.behaviors == other.behaviors
            and self.incompatibilities == other.incompatibilities
        )

    def __repr__(self) -> str:
        return (
            f"Catalog({len(self.tasks)} tasks, {len(self.behaviors)} behaviors, "
            f"{len(self.incompatibilities)} incompatibilities)"
        )

    def candidate_names(self, task: str) -> tuple[str, ...]:
        return tuple(b.name for b in self.candidates[task])

    def suitability(self, behavior: str) -> float:
        return self.behavior_by_name[behavior].suitability

    def component_of(self, task: str) -> int:
        return self._component_of[task]

    def reactive_tasks(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tasks if t.reactive_start)

    def incompatible_with(self, task: str) -> tuple[str, ...]:
        out = []
        for pair in self.incompatibilities:
            if pair.task_a == task:
                out.append(pair.task_b)
            elif pair.task_b == task:
                out.append(pair.task_a)
        return tuple(out)


def _constraint_edges(catalog: Catalog) -> list[tuple[str, str]]:
    """Undirected edges of the constraint graph over known task names."""
    edges: list[tuple[str, str]] = []
    known = catalog.task_by_name
    for pair in catalog.incompatibilities:
        if pair.task_a in known and pair.task_b in known:
            edges.append((pair.task_a, pair.task_b))
    for beh in catalog.behaviors:
        if beh.task not in known:
            continue
        for req in beh.requires:
            if req.task in known:
                edges.append((beh.task, req.task))
    return edges


def _connected_components(catalog: Catalog) -> tuple[frozenset, ...]:
    adjacency: dict[str, set[str]] = {name: set() for name in catalog.task_names}
    for a, b in _constraint_edges(catalog):
        adjacency[a].add(b)
        adjacency[b].add(a)

    seen: set[str] = set()
    components: list[frozenset] = []
    for name in catalog.task_names:
        if name in seen:
            continue
        group = {name}
        frontier = [name]
        while frontier:
            current = frontier.pop()
            for neighbor in adjacency[current]:
                if neighbor not in group:
                    group.add(neighbor)
                    frontier.append(neighbor)
        seen |= group
        components.append(frozenset(group))
    return tuple(components)


def connected_components(catalog: Catalog) -> tuple[frozenset, ...]:
    """Partition task names by connectivity in the constraint graph.

    Edges are incompatibility pairs plus requirement edges (the task of a
    behavior to each task it requires). Computed once at load; the result is
    cached on the catalog.
    """
    return catalog._components


def _requirement_cycle(catalog: Catalog) -> list[str] | None:
    """Find a cycle in the static task-level requirement graph, if any."""
    successors: dict[str, set[str]] = {name: set() for name in catalog.task_names}
    for beh in catalog.behaviors:
        if beh.task not in successors:
            continue
        for req in beh.requires:
            if req.task in successors:
                successors[beh.task].add(req.task)

    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in catalog.task_names}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        color[node] = GRAY
        stack.append(node)
        for nxt in sorted(successors[node]):
            if color[nxt] == GRAY:
                return stack[stack.index(nxt):] + [nxt]
            if color[nxt] == WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        color[node] = BLACK
        return None

    for name in catalog.task_names:
        if color[name] == WHITE:
            found = visit(name)
            if found:
                return found
    return None


def requirement_topo_order(catalog: Catalog) -> tuple[str, ...]:
    """Task names ordered so every required task precedes its dependents.

    Kahn's algorithm with ties broken by catalog declaration order, so the
    result is stable across runs. Raises CatalogError on a cycle.
    """
    successors: dict[str, set[str]] = {name: set() for name in catalog.task_names}
    indegree: dict[str, int] = {name: 0 for name in catalog.task_names}
    for beh in catalog.behaviors:
        if beh.task not in successors:
            continue
        for req in beh.requires:
            if req.task in successors and req.task not in successors[beh.task]:
                successors[beh.task].add(req.task)
                indegree[req.task] += 1

    # Requirement edges point dependent -> required; emit required tasks first
    # by peeling zero-indegree nodes of the reversed relation.
    order: list[str] = []
    ready = [name for name in catalog.task_names if not successors[name]]
    emitted: set[str] = set()
    while ready:
        node = ready.pop(0)
        order.append(node)
        emitted.add(node)
        for name in catalog.task_names:
            if name in emitted or name in ready:
                continue
            if successors[name] and successors[name] <= emitted:
                ready.append(name)
    if len(order) != len(catalog.task_names):
        raise CatalogError("requirement graph contains a cycle")
    return tuple(order)


def validate_catalog(catalog: Catalog) -> ValidationReport:
    """Check every model invariant and report violations as data."""
    report: ValidationReport = []

    def bad(kind: str, message: str) -> None:
        report.append(Violation(kind, message))

    seen_tasks: set[str] = set()
    for task in catalog.tasks:
        if task.name in seen_tasks:
            bad("duplicate-task", f"duplicate task name {task.name!r}")
        seen_tasks.add(task.name)
        if task.start_on_request and task.reactive_start:
            bad(
                "start-mode-conflict",
                f"task {task.name!r} cannot be both start_on_request and reactive_start",
            )
        if task.min_performance is not None and not 0.0 <= task.min_performance <= 1.0:
            bad(
                "min-performance-range",
                f"task {task.name!r} min_performance {task.min_performance} outside [0, 1]",
            )

    seen_behaviors: set[str] = set()
    for beh in catalog.behaviors:
        if beh.name in seen_behaviors:
            bad("duplicate-behavior", f"duplicate behavior name {beh.name!r}")
        seen_behaviors.add(beh.name)
        if beh.task not in catalog.task_by_name:
            bad("dangling-task", f"behavior {beh.name!r} performs unknown task {beh.task!r}")
        if not 0.0 <= beh.suitability <= 1.0:
            bad(
                "suitability-range",
                f"behavior {beh.name!r} suitability {beh.suitability} out of range [0, 1]",
            )
        if beh.timeout_ms is not None and beh.timeout_ms <= 0:
            bad("timeout-range", f"behavior {beh.name!r} timeout must be positive")
        for req in beh.requires:
            if req.task not in catalog.task_by_name:
                bad(
                    "dangling-requirement",
                    f"behavior {beh.name!r} requires unknown task {req.task!r}",
                )
            if req.task == beh.task:
                bad(
                    "self-requirement",
                    f"behavior {beh.name!r} requires its own task {req.task!r}",
                )
            if not 0.0 <= req.min_performance <= 1.0:
                bad(
                    "min-performance-range",
                    f"requirement {beh.name!r}->{req.task!r} min_performance "
                    f"{req.min_performance} outside [0, 1]",
                )

    for pair in catalog.incompatibilities:
        if pair.task_a == pair.task_b:
            bad("self-incompatibility", f"task {pair.task_a!r} marked incompatible with itself")
        for name in (pair.task_a, pair.task_b):
            if name not in catalog.task_by_name:
                bad("dangling-incompatibility", f"incompatibility names unknown task {name!r}")

    cycle = _requirement_cycle(catalog)
    if cycle:
        bad("requirement-cycle", "requirement cycle: " + " -> ".join(cycle))

    return report


_TASK_KEYS = {"name", "start_on_request", "reactive_start", "min_performance"}
_BEHAVIOR_KEYS = {"name", "task", "suitability", "timeout_s", "situation", "requires"}


def _expect_mapping(node: object, where: str) -> dict:
    if not isinstance(node, dict):
        raise CatalogError(f"{where}: expected a mapping, got {type(node).__name__}")
    return node


def _expect_str(node: object, where: str) -> str:
    if not isinstance(node, str) or not node:
        raise CatalogError(f"{where}: expected a non-empty string")
    return node


def _expect_number(node: object, where: str) -> float:
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise CatalogError(f"{where}: expected a number")
    return float(node)


def _expect_bool(node: object, where: str) -> bool:
    if not isinstance(node, bool):
        raise CatalogError(f"{where}: expected a boolean")
    return node


def _reject_unknown(entry: dict, allowed: set, where: str) -> None:
    unknown = set(entry) - allowed
    if unknown:
        raise CatalogError(f"{where}: unknown field(s) {sorted(unknown)}")


def _parse_task(entry: object, index: int) -> TaskSpec:
    where = f"tasks[{index}]"
    mapping = _expect_mapping(entry, where)
    _reject_unknown(mapping, _TASK_KEYS, where)
    name = _expect_str(mapping.get("name"), f"{where}.name")
    min_perf = mapping.get("min_performance")
    return TaskSpec(
        name=name,
        start_on_request=_expect_bool(mapping.get("start_on_request", False), f"{where}.start_on_request"),
        reactive_start=_expect_bool(mapping.get("reactive_start", False), f"{where}.reactive_start"),
        min_performance=None if min_perf is None else _expect_number(min_perf, f"{where}.min_performance"),
    )


def _parse_behavior(entry: object, index: int) -> BehaviorSpec:
    where = f"behaviors[{index}]"
    mapping = _expect_mapping(entry, where)
    _reject_unknown(mapping, _BEHAVIOR_KEYS, where)
    name = _expect_str(mapping.get("name"), f"{where}.name")
    task = _expect_str(mapping.get("task"), f"{where}.task")
    suitability = _expect_number(mapping.get("suitability"), f"{where}.suitability")

    timeout_ms: int | None = None
    if mapping.get("timeout_s") is not None:
        timeout_ms = int(round(_expect_number(mapping["timeout_s"], f"{where}.timeout_s") * 1000))

    conditions: list[SituationCondition] = []
    for ci, cond in enumerate(mapping.get("situation") or []):
        cwhere = f"{where}.situation[{ci}]"
        cmap = _expect_mapping(cond, cwhere)
        _reject_unknown(cmap, {"key", "value"}, cwhere)
        key = _expect_str(cmap.get("key"), f"{cwhere}.key")
        if "value" not in cmap:
            raise CatalogError(f"{cwhere}: missing value")
        conditions.append(SituationCondition(key, cmap["value"]))

    requires: list[Requirement] = []
    for ri, req in enumerate(mapping.get("requires") or []):
        rwhere = f"{where}.requires[{ri}]"
        rmap = _expect_mapping(req, rwhere)
        _reject_unknown(rmap, {"task", "min_performance"}, rwhere)
        rtask = _expect_str(rmap.get("task"), f"{rwhere}.task")
        rmin = rmap.get("min_performance", 0.0)
        requires.append(Requirement(rtask, _expect_number(rmin, f"{rwhere}.min_performance")))

    return BehaviorSpec(
        name=name,
        task=task,
        suitability=suitability,
        timeout_ms=timeout_ms,
        situation=tuple(conditions),
        requires=tuple(requires),
    )


def parse_catalog(text: str, strict: bool = True) -> Catalog:
    """Parse catalog YAML into an indexed Catalog.

    With ``strict`` (the default) any invariant violation — duplicate names,
    dangling references, out-of-range suitability, requirement cycles — is
    raised as CatalogError. With ``strict=False`` the catalog is built as
    declared and ``validate_catalog`` reports the violations, which is what
    the ``check`` command uses to distinguish bad data from unreadable input.
    """
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise CatalogError(
                f"syntax error at line {mark.line + 1}, column {mark.column + 1}: "
                f"{getattr(exc, 'problem', exc)}"
            ) from exc
        raise CatalogError(f"syntax error: {exc}") from exc

    if root is None:
        root = {}
    root = _expect_mapping(root, "catalog")
    _reject_unknown(root, {"tasks", "behaviors", "constraints"}, "catalog")

    tasks_node = root.get("tasks") or []
    behaviors_node = root.get("behaviors") or []
    if not isinstance(tasks_node, list):
        raise CatalogError("tasks: expected a list")
    if not isinstance(behaviors_node, list):
        raise CatalogError("behaviors: expected a list")

    tasks = tuple(_parse_task(entry, i) for i, entry in enumerate(tasks_node))
    behaviors = tuple(_parse_behavior(entry, i) for i, entry in enumerate(behaviors_node))

    incompatibilities: list[CompatibilityConstraint] = []
    constraints_node = root.get("constraints") or {}
    constraints_node = _expect_mapping(constraints_node, "constraints")
    _reject_unknown(constraints_node, {"incompatible"}, "constraints")
    for pi, pair in enumerate(constraints_node.get("incompatible") or []):
        where = f"constraints.incompatible[{pi}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise CatalogError(f"{where}: expected a pair of task names")
        a = _expect_str(pair[0], f"{where}[0]")
        b = _expect_str(pair[1], f"{where}[1]")
        normalized = CompatibilityConstraint.normalized(a, b)
        if normalized not in incompatibilities:
            incompatibilities.append(normalized)

    catalog = Catalog(tasks, behaviors, tuple(incompatibilities))
    if strict:
        report = validate_catalog(catalog)
        if report:
            raise CatalogError("; ".join(v.message for v in report))
    return catalog


def catalog_to_dict(catalog: Catalog) -> dict:
    """Plain-data form of a catalog; parse_catalog(yaml.dump(...)) round-trips."""
    tasks = []
    for task in catalog.tasks:
        entry: dict = {"name": task.name}
        if task.start_on_request:
            entry["start_on_request"] = True
        if task.reactive_start:
            entry["reactive_start"] = True
        if task.min_performance is not None:
            entry["min_performance"] = task.min_performance
        tasks.append(entry)

    behaviors = []
    for beh in catalog.behaviors:
        entry = {"name": beh.name, "task": beh.task, "suitability": beh.suitability}
        if beh.timeout_ms is not None:
            seconds = beh.timeout_ms / 1000.0
            entry["timeout_s"] = int(seconds) if seconds.is_integer() else seconds
        if beh.situation:
            entry["situation"] = [{"key": c.key, "value": c.value} for c in beh.situation]
        if beh.requires:
            entry["requires"] = [
                {"task": r.task, "min_performance": r.min_performance}
                if r.min_performance
                else {"task": r.task}
                for r in beh.requires
            ]
        behaviors.append(entry)

    out: dict = {"tasks": tasks, "behaviors": behaviors}
    if catalog.incompatibilities:
        out["constraints"] = {
            "incompatible": [[p.task_a, p.task_b] for p in catalog.incompatibilities]
        }
    return out


def catalog_to_yaml(catalog: Catalog) -> str:
    return yaml.safe_dump(catalog_to_dict(catalog), sort_keys=False)
