"""Synthetic catalogs and solver timing for search-space scaling runs.

Generated catalogs are layered so the requirement graph is acyclic by
construction: a behavior of task i only ever requires tasks with a higher
index. Timing wraps the optimizing solve only; building the domain table is
excluded from the measurement.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from random import Random

from .catalog import (
    BehaviorSpec,
    Catalog,
    CompatibilityConstraint,
    Requirement,
    TaskSpec,
)
from .coordinator import new_state
from .csp import INACTIVE, SolverConfig, build_constraints
from .optimizer import solve_optimal

_SUITABILITIES = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def generate_catalog(
    tasks: int = 12,
    behaviors_per_task: int = 3,
    requires_per_behavior: int = 1,
    incompat_density: float = 0.32,
    seed: int = 0,
) -> Catalog:
    """Random layered catalog; identical parameters and seed give identical output."""
    if tasks < 1 or behaviors_per_task < 1 or requires_per_behavior < 0:
        raise ValueError("generator parameters must be positive")
    rng = Random(seed)

    task_specs = tuple(TaskSpec(f"T{i:02d}") for i in range(tasks))
    behaviors = []
    for i in range(tasks):
        later = list(range(i + 1, tasks))
        for j in range(behaviors_per_task):
            count = min(requires_per_behavior, len(later))
            required = sorted(rng.sample(later, count)) if count else []
            behaviors.append(
                BehaviorSpec(
                    name=f"T{i:02d}_B{j}",
                    task=f"T{i:02d}",
                    suitability=rng.choice(_SUITABILITIES),
                    requires=tuple(Requirement(f"T{k:02d}") for k in required),
                )
            )

    incompatibilities = []
    for a in range(tasks):
        for b in range(a + 1, tasks):
            if rng.random() < incompat_density:
                incompatibilities.append(
                    CompatibilityConstraint.normalized(f"T{a:02d}", f"T{b:02d}")
                )

    return Catalog(task_specs, tuple(behaviors), tuple(incompatibilities))


@dataclass
class BenchReport:
    tasks: int
    behaviors: int
    constraint_count: int
    search_space: int
    t_first_ms: float
    t_five_ms: float


def full_domain_table(catalog: Catalog) -> dict:
    """Every task's complete domain: no initialization procedure applied."""
    return {
        name: [INACTIVE] + list(catalog.candidate_names(name))
        for name in catalog.task_names
    }


def run_bench(catalog: Catalog, seed: int = 0, budget_ms: float = 10_000.0) -> BenchReport:
    state = new_state(catalog, SolverConfig(seed=seed))
    table = full_domain_table(catalog)
    search_space = math.prod(len(values) for values in table.values())
    constraint_count = len(build_constraints(catalog))

    def timed(max_solutions: int) -> float:
        config = SolverConfig(
            max_solutions=max_solutions, max_search_time_ms=budget_ms, seed=seed
        )
        started = time.perf_counter()
        result = solve_optimal({k: list(v) for k, v in table.items()}, state, config)
        elapsed = (time.perf_counter() - started) * 1000.0
        if result is None:
            raise RuntimeError("bench catalog unexpectedly has no consistent configuration")
        return elapsed

    t_first = timed(1)
    t_five = timed(5)
    return BenchReport(
        tasks=len(catalog.tasks),
        behaviors=len(catalog.behaviors),
        constraint_count=constraint_count,
        search_space=search_space,
        t_first_ms=t_first,
        t_five_ms=t_five,
    )
