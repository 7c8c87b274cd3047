"""Command-line front end: check, solve, coordinate, bench.

Exit codes are a stable contract: 0 success, 1 validation violations,
2 unreadable or malformed input, 3 no consistent configuration, 4 oracle
cross-check mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import yaml

from .bench import generate_catalog, run_bench
from .catalog import CatalogError, catalog_to_yaml, parse_catalog, validate_catalog
from .coordinator import OracleMismatch, handle_event, new_state
from .csp import (
    BehaviorFinished,
    SolverConfig,
    StartRequest,
    StopRequest,
    TerminationCause,
)
from .mission import MissionRunner
from .optimizer import RequestRecord
from .simharness import ScenarioError, SituationStore, parse_scenario
from .trace import format_text, to_record

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INPUT = 2
EXIT_NO_SOLUTION = 3
EXIT_ORACLE_MISMATCH = 4


def _default_seed() -> int:
    try:
        return int(os.environ.get("COORD_SEED", "0"))
    except ValueError:
        return 0


def _read_file(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _fail_input(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def cmd_check(args: argparse.Namespace) -> int:
    try:
        text = _read_file(args.catalog)
    except OSError as exc:
        return _fail_input(str(exc))
    try:
        catalog = parse_catalog(text, strict=False)
    except CatalogError as exc:
        return _fail_input(str(exc))
    report = validate_catalog(catalog)
    if report:
        for violation in report:
            print(violation.message)
        return EXIT_VIOLATIONS
    print(
        f"OK: {len(catalog.tasks)} tasks, {len(catalog.behaviors)} behaviors, "
        f"{len(catalog.incompatibilities)} incompatibilities"
    )
    return EXIT_OK


def _load_state_file(path: str, catalog, config: SolverConfig):
    """One-shot solver state: situation, running behaviors, live requests."""
    raw = yaml.safe_load(_read_file(path)) or {}
    if not isinstance(raw, dict) or set(raw) - {"situation", "running", "requests"}:
        raise CatalogError("state file: expected situation/running/requests mapping")
    situation = raw.get("situation") or {}
    if not isinstance(situation, dict):
        raise CatalogError("state file: situation must be a mapping")
    state = new_state(catalog, config, situation=SituationStore(situation))
    running = raw.get("running") or {}
    if not isinstance(running, dict):
        raise CatalogError("state file: running must be a task -> behavior mapping")
    for task, behavior in running.items():
        if task not in catalog.task_by_name:
            raise CatalogError(f"state file: unknown task {task!r}")
        beh = catalog.behavior_by_name.get(behavior)
        if beh is None or beh.task != task:
            raise CatalogError(f"state file: {behavior!r} is not a candidate of {task!r}")
        state.current[task] = behavior
    for i, entry in enumerate(raw.get("requests") or []):
        if not isinstance(entry, dict) or "task" not in entry:
            raise CatalogError(f"state file: requests[{i}] needs a task")
        task = entry["task"]
        if task not in catalog.task_by_name:
            raise CatalogError(f"state file: unknown task {task!r}")
        priority = entry.get("priority", 0)
        if not isinstance(priority, int) or priority < 0:
            raise CatalogError(f"state file: requests[{i}] priority must be >= 0")
        state.sequence += 1
        state.requests.append(RequestRecord(task, priority, state.sequence))
    return state


def _build_trigger(args: argparse.Namespace, catalog):
    if args.verb == "start":
        if args.name not in catalog.task_by_name:
            raise CatalogError(f"unknown task {args.name!r}")
        return StartRequest(args.name, args.priority)
    if args.verb == "stop":
        if args.name not in catalog.task_by_name:
            raise CatalogError(f"unknown task {args.name!r}")
        return StopRequest(args.name)
    if args.name not in catalog.behavior_by_name:
        raise CatalogError(f"unknown behavior {args.name!r}")
    try:
        cause = TerminationCause(args.cause)
    except ValueError:
        raise CatalogError(
            f"unknown cause {args.cause!r}; expected one of "
            f"{[c.value for c in TerminationCause]}"
        ) from None
    return BehaviorFinished(args.name, cause)


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        catalog = parse_catalog(_read_file(args.catalog))
        config = SolverConfig(
            max_solutions=args.max_solutions,
            max_search_time_ms=args.max_time_ms,
            seed=args.seed,
        )
        if args.state:
            state = _load_state_file(args.state, catalog, config)
        else:
            state = new_state(catalog, config)
        trigger = _build_trigger(args, catalog)
    except (OSError, CatalogError, yaml.YAMLError, ValueError) as exc:
        return _fail_input(str(exc))

    state.cross_check = args.oracle
    try:
        _, delta = handle_event(state, trigger)
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_ORACLE_MISMATCH

    if delta.stale:
        print("no effect: behavior is not active")
        return EXIT_OK
    if not delta.solved:
        print("no consistent configuration", file=sys.stderr)
        return EXIT_NO_SOLUTION

    for task in catalog.task_names:
        print(f"{task} = {state.current[task] or '-'}")
    vector = delta.vector
    if vector is not None:
        print(
            "objective: "
            f"f1={vector.satisfied_requests:g} f2={vector.suitability_product:g} "
            f"f3={vector.inactivity:g} f4={vector.change_penalty:g}"
        )
    for entry in delta.deactivations:
        print(f"- {entry.behavior}")
    for entry in delta.activations:
        print(f"+ {entry.behavior}")
    return EXIT_OK


def cmd_coordinate(args: argparse.Namespace) -> int:
    try:
        catalog = parse_catalog(_read_file(args.catalog))
        scenario = parse_scenario(_read_file(args.scenario))
        config = SolverConfig(
            max_solutions=args.max_solutions,
            max_search_time_ms=args.max_time_ms,
            seed=args.seed,
            reactive_delay_ms=args.delta_ms,
        )
        runner = MissionRunner(catalog, scenario, config, cross_check=args.oracle)
    except (OSError, CatalogError, ScenarioError, ValueError) as exc:
        return _fail_input(str(exc))

    try:
        runner.run()
    except OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return EXIT_ORACLE_MISMATCH

    if args.format == "jsonl":
        for line in runner.trace:
            print(json.dumps(to_record(line)))
        print(json.dumps({"summary": runner.summary()}))
    else:
        for line in runner.trace:
            print(format_text(line))
        summary = runner.summary()
        print(" ".join(f"{key}={value}" for key, value in summary.items()))

    timing = runner.timing()
    if timing is not None:
        print(
            f"solve timing: solves={timing['solves']} "
            f"t_mean={timing['t_mean_ms']:.3f}ms "
            f"t_min={timing['t_min_ms']:.3f}ms "
            f"t_max={timing['t_max_ms']:.3f}ms",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        catalog = generate_catalog(
            tasks=args.tasks,
            behaviors_per_task=args.behaviors_per_task,
            requires_per_behavior=args.requires_per_behavior,
            incompat_density=args.incompat_density,
            seed=args.seed,
        )
    except ValueError as exc:
        return _fail_input(str(exc))
    if args.save:
        Path(args.save).write_text(catalog_to_yaml(catalog), encoding="utf-8")
    report = run_bench(catalog, seed=args.seed)
    print(
        f"tasks={report.tasks} behaviors={report.behaviors} "
        f"requires_per_behavior={args.requires_per_behavior} "
        f"incompat_density={args.incompat_density} seed={args.seed}"
    )
    print(f"constraints c={report.constraint_count}")
    print(f"search_space s={report.search_space} (~{report.search_space:.1e})")
    print(f"t(m=1) = {report.t_first_ms:.2f} ms")
    print(f"t(m=5) = {report.t_five_ms:.2f} ms")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="behaviorcoord",
        description="Constraint-based behavior coordination: validate catalogs, "
        "solve single triggers, replay missions, benchmark search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="validate a catalog file")
    check.add_argument("catalog")
    check.set_defaults(func=cmd_check)

    solve = sub.add_parser("solve", help="run one coordination solve for a trigger")
    solve.add_argument("catalog")
    solve.add_argument("verb", choices=("start", "stop", "finished"))
    solve.add_argument("name", help="task name (start/stop) or behavior name (finished)")
    solve.add_argument("cause", nargs="?", default="PROCESS_FAILURE",
                       help="termination cause for 'finished'")
    solve.add_argument("--priority", type=int, default=0)
    solve.add_argument("--state", help="YAML state file (situation/running/requests)")
    solve.add_argument("--seed", type=int, default=_default_seed())
    solve.add_argument("--max-solutions", type=int, default=10)
    solve.add_argument("--max-time-ms", type=float, default=50.0)
    solve.add_argument("--oracle", action="store_true",
                       help="cross-check the result against exhaustive enumeration")
    solve.set_defaults(func=cmd_solve)

    coordinate = sub.add_parser("coordinate", help="replay a scenario and emit the trace")
    coordinate.add_argument("catalog")
    coordinate.add_argument("scenario")
    coordinate.add_argument("--seed", type=int, default=_default_seed())
    coordinate.add_argument("--max-solutions", type=int, default=10)
    coordinate.add_argument("--max-time-ms", type=float, default=50.0)
    coordinate.add_argument("--delta-ms", type=int, default=500,
                            help="reactive start delay in simulated milliseconds")
    coordinate.add_argument("--format", choices=("text", "jsonl"), default="text")
    coordinate.add_argument("--oracle", action="store_true",
                            help="cross-check every solve against the oracle")
    coordinate.set_defaults(func=cmd_coordinate)

    bench = sub.add_parser("bench", help="generate a synthetic catalog and time the solver")
    bench.add_argument("--tasks", type=int, default=12)
    bench.add_argument("--behaviors-per-task", type=int, default=3)
    bench.add_argument("--requires-per-behavior", type=int, default=1)
    bench.add_argument("--incompat-density", type=float, default=0.32)
    bench.add_argument("--seed", type=int, default=_default_seed())
    bench.add_argument("--save", help="also write the generated catalog to this path")
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
