"""Managed behaviors, situation store, timeouts, scenario translation."""

import pytest

from behaviorcoord.catalog import parse_catalog
from behaviorcoord.coordinator import handle_event, new_state, run_cycle
from behaviorcoord.csp import (
    INACTIVE,
    BehaviorFinished,
    SolverConfig,
    StartRequest,
    StopRequest,
    TerminationCause,
)
from behaviorcoord.simharness import (
    ActivationError,
    ManagerRegistry,
    ScenarioError,
    ScenarioEvent,
    SituationStore,
    apply_scenario_event,
    bind_scenario,
    parse_scenario,
    poll_timeouts,
)

CATALOG_YAML = """
tasks:
  - {name: Watch}
  - {name: Move, start_on_request: true}
behaviors:
  - name: looker
    task: Watch
    suitability: 1.0
    timeout_s: 30
    situation: [{key: daylight, value: true}]
  - name: mover
    task: Move
    suitability: 1.0
"""


@pytest.fixture
def catalog():
    return parse_catalog(CATALOG_YAML)


@pytest.fixture
def registry(catalog):
    return ManagerRegistry(catalog, SituationStore({"daylight": True}))


class TestActivationLifecycle:
    def test_activate_feasible(self, registry):
        registry.activate("looker", 1000)
        assert registry.check_activation("looker")
        assert registry.managed["looker"].activation_ms == 1000

    def test_double_activation_rejected(self, registry):
        registry.activate("looker", 0)
        with pytest.raises(ActivationError, match="already active"):
            registry.activate("looker", 1)

    def test_infeasible_activation_rejected(self, catalog):
        registry = ManagerRegistry(catalog, SituationStore({"daylight": False}))
        with pytest.raises(ActivationError, match="infeasible"):
            registry.activate("looker", 0)

    def test_deactivate_records_interrupted(self, registry):
        registry.activate("looker", 0)
        registry.deactivate("looker")
        assert not registry.check_activation("looker")
        assert registry.interruptions == ["looker"]

    def test_deactivate_inactive_rejected(self, registry):
        with pytest.raises(ActivationError, match="not active"):
            registry.deactivate("looker")

    def test_reactivation_gets_fresh_clock(self, registry):
        registry.activate("looker", 0)
        registry.deactivate("looker")
        registry.activate("looker", 7000)
        assert registry.managed["looker"].activation_ms == 7000

    def test_unknown_behavior(self, registry):
        with pytest.raises(KeyError):
            registry.activate("ghost", 0)


class TestPollTimeouts:
    def test_fires_after_timeout(self, registry):
        registry.activate("looker", 0)
        fired = poll_timeouts(registry, 31_000)
        assert fired == [BehaviorFinished("looker", TerminationCause.TIME_OUT)]
        assert not registry.check_activation("looker")

    def test_no_timeout_configured_never_fires(self, registry):
        registry.activate("mover", 0)
        assert poll_timeouts(registry, 10_000_000) == []

    def test_boundary_is_exclusive(self, registry):
        registry.activate("looker", 0)
        assert poll_timeouts(registry, 30_000) == []
        assert poll_timeouts(registry, 30_001) != []

    def test_fires_once_per_activation(self, registry):
        registry.activate("looker", 0)
        assert len(poll_timeouts(registry, 31_000)) == 1
        assert poll_timeouts(registry, 32_000) == []

    def test_next_expiry(self, registry):
        assert registry.next_timeout_expiry() is None
        registry.activate("looker", 500)
        assert registry.next_timeout_expiry() == 30_500


class TestApplyScenarioEvent:
    def _state(self, catalog, situation=None):
        store = SituationStore(situation or {"daylight": True})
        managers = ManagerRegistry(catalog, store)
        return new_state(catalog, SolverConfig(seed=0), situation=store, managers=managers)

    def test_situation_change_synthesizes_termination(self, catalog):
        state = self._state(catalog)
        state.current["Watch"] = "looker"
        state.managers.activate("looker", 0)
        event = ScenarioEvent(0, "set_situation", key="daylight", value=False)
        triggers = apply_scenario_event(state, event)
        assert triggers == [
            BehaviorFinished("looker", TerminationCause.SITUATION_CHANGE)
        ]

    def test_synthesis_matches_failing_set_exactly(self, catalog):
        state = self._state(catalog)
        state.current["Watch"] = "looker"
        state.current["Move"] = "mover"
        event = ScenarioEvent(0, "set_situation", key="daylight", value=False)
        triggers = apply_scenario_event(state, event)
        # mover has no conditions: only looker terminates
        assert [t.behavior for t in triggers] == ["looker"]

    def test_irrelevant_key_no_triggers(self, catalog):
        state = self._state(catalog)
        state.current["Watch"] = "looker"
        event = ScenarioEvent(0, "set_situation", key="wind", value=9)
        assert apply_scenario_event(state, event) == []
        assert state.situation.get("wind") == 9

    def test_mutation_logged_with_time(self, catalog):
        state = self._state(catalog)
        state.clock_ms = 4200
        apply_scenario_event(
            state, ScenarioEvent(0, "set_situation", key="wind", value=3)
        )
        assert state.situation.log == [(4200, "wind", 3)]

    def test_verbatim_translations(self, catalog):
        state = self._state(catalog)
        assert apply_scenario_event(
            state, ScenarioEvent(0, "start_task", task="Move", priority=2)
        ) == [StartRequest("Move", 2)]
        assert apply_scenario_event(
            state, ScenarioEvent(0, "stop_task", task="Move")
        ) == [StopRequest("Move")]
        assert apply_scenario_event(
            state,
            ScenarioEvent(
                0, "behavior_finished", behavior="mover",
                cause=TerminationCause.GOAL_ACHIEVED,
            ),
        ) == [BehaviorFinished("mover", TerminationCause.GOAL_ACHIEVED)]


class TestCoordinatedInterruption:
    def test_commanded_stop_does_not_feed_back(self, catalog):
        state = self._managed(catalog)
        handle_event(state, StartRequest("Watch", 1))
        assert state.managers.active_names() == ["looker"]
        _, delta = handle_event(state, StopRequest("Watch"))
        assert [e.behavior for e in delta.deactivations] == ["looker"]
        assert state.managers.interruptions == ["looker"]
        # the interruption did not spawn a new trigger: a later cycle is quiet
        _, deltas = run_cycle(state, [], 99_000)
        assert deltas == []

    def test_active_set_tracks_assignment(self, catalog):
        state = self._managed(catalog)
        run_cycle(state, [StartRequest("Watch", 1)], 0)
        run_cycle(state, [StartRequest("Move", 2)], 10)
        run_cycle(state, [BehaviorFinished("mover", TerminationCause.GOAL_ACHIEVED)], 20)
        active = {v for v in state.current.values() if v is not None}
        assert set(state.managers.active_names()) == active

    def _managed(self, catalog):
        store = SituationStore({"daylight": True})
        managers = ManagerRegistry(catalog, store)
        return new_state(catalog, SolverConfig(seed=0), situation=store, managers=managers)


class TestScenarioParsing:
    def test_full_scenario(self):
        scenario = parse_scenario(
            """
initial_situation: {flying: true}
script:
  - at: 0.5
    start_task: {task: Move, priority: 2}
  - at: 1.0
    set_situation: {key: daylight, value: false}
  - at: 2.0
    behavior_finished: {behavior: mover, cause: GOAL_ACHIEVED}
  - at: 3.0
    stop_task: {task: Move}
"""
        )
        assert scenario.initial_situation == {"flying": True}
        kinds = [e.kind for e in scenario.script]
        assert kinds == ["start_task", "set_situation", "behavior_finished", "stop_task"]
        assert scenario.script[0].at_ms == 500

    def test_empty_scenario(self):
        scenario = parse_scenario("")
        assert scenario.script == ()

    def test_negative_time_rejected(self):
        with pytest.raises(ScenarioError):
            parse_scenario("script:\n  - {at: -1, stop_task: {task: X}}\n")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ScenarioError, match="unknown field"):
            parse_scenario("script:\n  - {at: 1, warp_drive: {}}\n")

    def test_unknown_cause_rejected(self):
        with pytest.raises(ScenarioError, match="cause"):
            parse_scenario(
                "script:\n  - {at: 1, behavior_finished: {behavior: b, cause: EXPLODED}}\n"
            )

    def test_bind_checks_names(self, catalog):
        scenario = parse_scenario("script:\n  - {at: 1, start_task: {task: Ghost}}\n")
        with pytest.raises(ScenarioError, match="unknown task"):
            bind_scenario(scenario, catalog)
