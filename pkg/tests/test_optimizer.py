"""Objective vector computation and the repeated-search optimizer."""

from random import Random

import pytest
from hypothesis import given, settings, strategies as st

from behaviorcoord.catalog import parse_catalog
from behaviorcoord.coordinator import new_state
from behaviorcoord.csp import INACTIVE, SolverConfig, StartRequest, initialize_domains, search
from behaviorcoord.optimizer import (
    ObjectiveVector,
    RequestRecord,
    count_changes,
    objective_vector,
    solve_optimal,
)
from behaviorcoord.oracle import enumerate_optimal
from behaviorcoord.simharness import SituationStore

from helpers import MINI_YAML, apply_pre_solve, domain_product, random_instance


@pytest.fixture
def mini():
    return parse_catalog(MINI_YAML)


class TestObjectiveVector:
    def test_identical_candidate_no_changes(self, mini):
        state = new_state(mini, situation=SituationStore())
        state.current = {"A": "a1", "B": "b1"}
        state.requests.append(RequestRecord("A", 1, 1))
        vector = objective_vector(dict(state.current), state)
        assert vector.satisfied_requests == 1.0
        assert vector.change_penalty == 1.0

    def test_half_satisfied(self, mini):
        state = new_state(mini, situation=SituationStore())
        state.requests.append(RequestRecord("A", 1, 1))
        state.requests.append(RequestRecord("B", 1, 2))
        candidate = {"A": INACTIVE, "B": "b1"}
        assert objective_vector(candidate, state).satisfied_requests == 0.5

    def test_suitability_product(self, mini):
        state = new_state(mini, situation=SituationStore())
        candidate = {"A": "a2", "B": "b1"}
        assert objective_vector(candidate, state).suitability_product == pytest.approx(0.6)

    def test_no_requests_ratio_one(self, mini):
        state = new_state(mini, situation=SituationStore())
        vector = objective_vector({"A": INACTIVE, "B": INACTIVE}, state)
        assert vector.satisfied_requests == 1.0

    def test_inactivity_counts_only_startable_tasks(self, mini):
        # A is start-on-request, so only B enters the inactivity ratio
        state = new_state(mini, situation=SituationStore())
        assert objective_vector({"A": "a2", "B": INACTIVE}, state).inactivity == 1.0
        assert objective_vector({"A": "a2", "B": "b1"}, state).inactivity == 0.0

    def test_change_penalty_counts_switch_as_two(self, mini):
        state = new_state(mini, situation=SituationStore())
        state.current = {"A": "a1", "B": INACTIVE}
        candidate = {"A": "a2", "B": "b1"}
        assert count_changes(state.current, candidate, mini) == 3
        assert objective_vector(candidate, state).change_penalty == pytest.approx(1 / 4)

    def test_lexicographic_order(self):
        high_f1 = ObjectiveVector(1.0, 0.1, 0.0, 0.0)
        low_f1 = ObjectiveVector(0.9, 1.0, 1.0, 1.0)
        assert high_f1 > low_f1
        tie_break_on_f4 = ObjectiveVector(1.0, 0.1, 0.0, 0.5)
        assert tie_break_on_f4 > high_f1

    @settings(deadline=None, max_examples=40)
    @given(st.integers(0, 20_000))
    def test_components_in_unit_interval(self, seed):
        catalog, state, trigger, floor = random_instance(seed)
        table = initialize_domains(catalog, state, trigger, floor)
        found = search(table, state.config, set(), state)
        if found is None:
            return
        vector = objective_vector(found, state)
        for component in vector.as_tuple():
            assert 0.0 <= component <= 1.0


class TestSolveOptimal:
    def _prepared(self, mini, priority=1):
        state = new_state(mini, SolverConfig(seed=3), situation=SituationStore())
        trigger = StartRequest("A", priority)
        apply_pre_solve(state, trigger)
        table = initialize_domains(mini, state, trigger, priority_floor=priority)
        return state, table

    def test_mini_picks_full_chain(self, mini):
        state, table = self._prepared(mini)
        result = solve_optimal(table, state, state.config)
        assert result is not None
        assignment, vector = result
        # both a1+b1 and a2 alone satisfy the request; the suitability
        # product 1.0 beats 0.6 before inactivity is even considered
        assert assignment == {"A": "a1", "B": "b1"}
        assert vector.satisfied_requests == 1.0
        assert vector.suitability_product == 1.0

    def test_single_solution_returned_after_exhaustion(self, mini):
        state = new_state(mini, situation=SituationStore())
        table = {"A": ["a2"], "B": [INACTIVE]}
        result = solve_optimal(table, state, state.config)
        assert result is not None
        assert result[0] == {"A": "a2", "B": INACTIVE}

    def test_inconsistent_returns_none(self, mini):
        state = new_state(mini, situation=SituationStore())
        table = {"A": [], "B": [INACTIVE]}
        assert solve_optimal(table, state, state.config) is None

    def test_max_solutions_one_equals_search(self, mini):
        state, table = self._prepared(mini)
        config = SolverConfig(max_solutions=1, seed=11)
        lone = search(
            {k: list(v) for k, v in table.items()}, config, set(), state, rng=Random(11)
        )
        result = solve_optimal(table, state, config)
        assert result is not None and lone is not None
        assert result[0] == lone

    @settings(deadline=None, max_examples=40)
    @given(st.integers(0, 30_000))
    def test_matches_oracle_on_small_instances(self, seed):
        catalog, state, trigger, floor = random_instance(seed)
        table = initialize_domains(catalog, state, trigger, floor)
        product = domain_product(table)
        if product > 600:
            return
        config = SolverConfig(
            max_solutions=max(product, 1), max_search_time_ms=10_000.0, seed=seed
        )
        result = solve_optimal(table, state, config)
        oracle = enumerate_optimal(table, state)
        if oracle.valid_count == 0:
            assert result is None
        else:
            assert result is not None
            assert result[1] == oracle.best_vector

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 30_000))
    def test_best_vector_monotone_in_max_solutions(self, seed):
        catalog, state, trigger, floor = random_instance(seed)
        table = initialize_domains(catalog, state, trigger, floor)
        if domain_product(table) > 600:
            return
        previous = None
        for m in (1, 2, 4, 8):
            config = SolverConfig(max_solutions=m, max_search_time_ms=10_000.0, seed=5)
            result = solve_optimal(table, state, config)
            if result is None:
                assert previous is None
                continue
            if previous is not None:
                assert result[1] >= previous
            previous = result[1]
