"""Scenario replay: a discrete-time driver around the coordination cycle.

The runner advances the simulated clock to the next moment anything can
happen — a scripted event, a due reactive start, or a behavior timeout — and
runs one coordination cycle there, collecting viewer-style trace lines. All
ordering is derived from the scenario and the seeded solver stream, so two
runs with the same inputs produce identical traces.
"""

from __future__ import annotations

from collections import deque

from .catalog import Catalog
from .coordinator import ActivationDelta, new_state, run_cycle
from .csp import BehaviorFinished, SolverConfig, TerminationCause
from .simharness import ManagerRegistry, Scenario, SituationStore, bind_scenario
from .trace import TraceLine


class MissionRunner:
    def __init__(
        self,
        catalog: Catalog,
        scenario: Scenario,
        config: SolverConfig | None = None,
        cross_check: bool = False,
    ) -> None:
        bind_scenario(scenario, catalog)
        self.catalog = catalog
        situation = SituationStore(scenario.initial_situation)
        managers = ManagerRegistry(catalog, situation)
        self.state = new_state(
            catalog, config, situation=situation, managers=managers, cross_check=cross_check
        )
        self.pending = deque(sorted(scenario.script, key=lambda event: event.at_ms))
        self.trace: list = []
        self.activations = 0
        self.deactivations = 0
        self.terminations = 0
        self.failed_solves = 0

    def _next_time(self) -> int | None:
        candidates = []
        if self.pending:
            candidates.append(self.pending[0].at_ms)
        if self.state.reactive_queue:
            candidates.append(min(entry.due_ms for entry in self.state.reactive_queue))
        expiry = self.state.managers.next_timeout_expiry()
        if expiry is not None:
            # The timeout poll uses strict inequality, so step just past it.
            candidates.append(expiry + 1)
        return min(candidates) if candidates else None

    def run(self) -> "MissionRunner":
        while True:
            now = self._next_time()
            if now is None:
                break
            batch = []
            while self.pending and self.pending[0].at_ms <= now:
                batch.append(self.pending.popleft())
            _, deltas = run_cycle(self.state, batch, now)
            for delta in deltas:
                self._record(delta)
        return self

    def _record(self, delta: ActivationDelta) -> None:
        if delta.stale:
            return
        trigger = delta.trigger
        if isinstance(trigger, BehaviorFinished):
            self.terminations += 1
            self.trace.append(
                TraceLine(
                    delta.time_ms,
                    trigger.behavior,
                    delta.priority,
                    "-",
                    trigger.cause is TerminationCause.GOAL_ACHIEVED,
                    trigger.cause.value,
                )
            )
        if not delta.solved:
            self.failed_solves += 1
        for entry in delta.deactivations:
            self.deactivations += 1
            self.trace.append(
                TraceLine(
                    delta.time_ms,
                    entry.behavior,
                    entry.priority,
                    "-",
                    entry.success,
                    TerminationCause.INTERRUPTED.value,
                )
            )
        for entry in delta.activations:
            self.activations += 1
            self.trace.append(
                TraceLine(delta.time_ms, entry.behavior, entry.priority, "+", entry.success)
            )

    def summary(self) -> dict:
        return {
            "activations": self.activations,
            "deactivations": self.deactivations,
            "terminations": self.terminations,
            "failed_solves": self.failed_solves,
            "solves": len(self.state.solve_times_ms),
        }

    def timing(self) -> dict | None:
        """Wall-clock solver statistics; not part of the deterministic trace."""
        times = self.state.solve_times_ms
        if not times:
            return None
        return {
            "solves": len(times),
            "t_mean_ms": sum(times) / len(times),
            "t_min_ms": min(times),
            "t_max_ms": max(times),
        }

    def active_behaviors(self) -> list:
        return [
            value for value in self.state.current.values() if value is not None
        ]
