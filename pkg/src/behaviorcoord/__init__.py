"""Constraint-based behavior coordination for self-adaptive robots."""

from .catalog import (
    BehaviorSpec,
    Catalog,
    CatalogError,
    CompatibilityConstraint,
    Requirement,
    TaskSpec,
    connected_components,
    parse_catalog,
    validate_catalog,
)
from .coordinator import (
    ActivationDelta,
    CoordinatorState,
    diff_assignments,
    handle_event,
    new_state,
    run_cycle,
    solve_with_escalation,
    update_reactive_queue,
)
from .csp import (
    INACTIVE,
    BehaviorFinished,
    SolverConfig,
    StartRequest,
    StopRequest,
    TerminationCause,
    check_assignment,
    initialize_domains,
    search,
    task_performance,
)
from .mission import MissionRunner
from .optimizer import ObjectiveVector, RequestRecord, objective_vector, solve_optimal
from .oracle import OracleResult, enumerate_optimal
from .simharness import (
    ManagerRegistry,
    Scenario,
    ScenarioEvent,
    SituationStore,
    parse_scenario,
)

__version__ = "0.1.0"
