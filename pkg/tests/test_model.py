"""
Tests for the network-attribute co-evolution model.

Test Categories:
    - Effects and change statistics
    - Choice distributions and intensity matrices
    - Dependency sets
    - Forward simulation and the trajectory likelihood
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import softmax

from social_dynamics.core.oracle import build_joint_generator, exact_transition_kernel, joint_states
from social_dynamics.core.variables import VariableId
from social_dynamics.exceptions import InvalidModelError
from social_dynamics.model.coevolution import CoevolutionModel
from social_dynamics.model.effects import (
    EffectSpec,
    attribute_change_statistics,
    effect_value,
    effect_vector,
    network_change_statistics,
)
from social_dynamics.model.params import ModelDefinition, ModelParams
from social_dynamics.model.simulation import forward_sample, sample_initial_state, simulate
from social_dynamics.model.state import AttributeSpec, NetworkState

ALL_NETWORK = (EffectSpec.network("density"), EffectSpec.network("reciprocity"),
               EffectSpec.network("similarity", 0), EffectSpec.network("activity"),
               EffectSpec.network("popularity"))
ATTRS = (AttributeSpec("z", 0, 3),)


@st.composite
def network_states(draw, n=4):
    bits = draw(st.lists(st.integers(0, 1), min_size=n * n, max_size=n * n))
    y = np.array(bits).reshape(n, n)
    np.fill_diagonal(y, 0)
    z = np.array(draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))).reshape(1, n)
    return NetworkState(y, z, ATTRS)


def _toggled(state: NetworkState, i: int, j: int) -> NetworkState:
    out = state.copy()
    out.y[i, j] = 1 - out.y[i, j]
    return out


def _cim_entries(model: CoevolutionModel, v: VariableId, state: NetworkState) -> np.ndarray:
    if v.is_link:
        return model.link_cim(v.first, v.second, state).q
    return model.attribute_cim(v.first, v.second, state).q


@pytest.mark.model
class TestEffects:
    """Direct effect evaluation."""

    def test_values_on_known_state(self, small_state):
        density, recip, sim = (EffectSpec.network("density"), EffectSpec.network("reciprocity"),
                               EffectSpec.network("similarity", 0))
        assert effect_value(density, 1, small_state) == 2
        assert effect_value(recip, 0, small_state) == 1
        assert effect_value(sim, 0, small_state) == 0.0
        assert effect_value(sim, 1, small_state) == pytest.approx(0.5)
        assert effect_value(EffectSpec.network("activity"), 1, small_state) == 1
        assert effect_value(EffectSpec.network("popularity"), 1, small_state) == 2
        assert effect_value(EffectSpec.for_attribute(0, "tendency"), 2, small_state) == 1

    def test_placement_rules(self):
        with pytest.raises(InvalidModelError):
            EffectSpec.network("tendency")
        with pytest.raises(InvalidModelError):
            EffectSpec.for_attribute(0, "activity")
        with pytest.raises(InvalidModelError):
            EffectSpec.network("similarity")
        with pytest.raises(InvalidModelError):
            EffectSpec.network("density", 0)

    def test_labels(self, small_definition):
        assert small_definition.network_labels() == ["density", "reciprocity", "similarity(z)"]
        assert small_definition.attribute_labels() == ["z:tendency", "z:similarity(z)"]

    @settings(max_examples=60, deadline=None)
    @given(network_states(), st.integers(0, 3))
    def test_network_change_statistics_match_direct_evaluation(self, state, i):
        fast = network_change_statistics(ALL_NETWORK, i, state)
        for j in range(state.n_actors):
            if j == i:
                assert np.all(fast[j] == 0.0)
                continue
            direct = effect_vector(ALL_NETWORK, i, _toggled(state, i, j))
            assert np.allclose(fast[j], direct), f"toggle {i}->{j} differs"

    @settings(max_examples=60, deadline=None)
    @given(network_states(), st.integers(0, 3))
    def test_attribute_change_statistics_match_direct_evaluation(self, state, i):
        specs = (EffectSpec.for_attribute(0, "tendency"), EffectSpec.for_attribute(0, "similarity"))
        feats, feasible = attribute_change_statistics(specs, 0, i, state)
        for s, step in enumerate((-1, 1)):
            moved = int(state.z[0, i]) + step
            assert feasible[s] == (0 <= moved <= 3)
            if feasible[s]:
                other = state.copy()
                other.z[0, i] = moved
                assert np.allclose(feats[s], effect_vector(specs, i, other))


@pytest.mark.model
class TestChoiceDistributions:
    """Logit choice probabilities and CIMs."""

    def test_network_probs(self, small_model, small_state):
        for i in range(3):
            probs = small_model.network_choice_probs(i, small_state)
            assert probs[i] == 0.0
            assert probs.sum() == pytest.approx(1.0)

    def test_network_probs_are_softmax_of_utilities(self, small_model, small_state):
        feats = network_change_statistics(small_model.definition.network_effects, 0, small_state)
        util = feats[[1, 2]] @ small_model.params.network_weights
        assert np.allclose(small_model.network_choice_probs(0, small_state)[[1, 2]], softmax(util))

    def test_attribute_probs_at_range_edges(self, small_model, small_state):
        probs = small_model.attribute_choice_probs(0, 0, small_state)
        assert probs.tolist() == [0.0, 1.0], "actor at the minimum can only move up"
        probs = small_model.attribute_choice_probs(1, 0, small_state)
        assert probs.tolist() == [1.0, 0.0], "actor at the maximum can only move down"
        assert small_model.attribute_choice_probs(2, 0, small_state).sum() == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=-3, max_value=3), min_size=5, max_size=5), network_states())
    def test_choice_probs_sum_to_one(self, beta, state):
        definition = ModelDefinition(4, ATTRS, ALL_NETWORK)
        model = CoevolutionModel(definition, ModelParams.shared(4, 1.0, 0.0, beta))
        for i in range(4):
            assert model.network_choice_probs(i, state).sum() == pytest.approx(1.0)

    def test_constant_density_shift_cancels_for_empty_row(self, small_state):
        definition = ModelDefinition(3, small_state.attributes, (EffectSpec.network("density"),
                                                                 EffectSpec.network("reciprocity")))
        a = CoevolutionModel(definition, ModelParams.shared(3, 1.0, 0.0, [0.0, 1.0]))
        b = CoevolutionModel(definition, ModelParams.shared(3, 1.0, 0.0, [5.0, 1.0]))
        pa = a.network_choice_probs(2, small_state)
        pb = b.network_choice_probs(2, small_state)
        assert np.allclose(pa, pb), "actor 2 has no links, so every toggle adds one link"

    def test_link_cim_matches_variable_rates(self, small_model, small_state):
        cim = small_model.link_cim(0, 2, small_state)
        up = small_model.variable_rates(VariableId.link(0, 2), small_state)[1]
        assert cim.rate(0, 1) == pytest.approx(up)
        down = small_model.variable_rates(VariableId.link(0, 1), small_state)
        assert list(down) == [0]
        assert small_model.link_cim(0, 1, small_state).rate(1, 0) == pytest.approx(down[0])

    def test_attribute_cim_edges(self, small_model, small_state):
        cim = small_model.attribute_cim(0, 2, small_state)
        assert cim.dim == 3
        assert cim.rate(0, 1) == pytest.approx(0.5)
        assert cim.rate(2, 1) == pytest.approx(0.5)
        assert cim.rate(0, 2) == 0.0

    def test_global_intensity(self, small_model, small_state):
        target = _toggled(small_state, 2, 0)
        expected = small_model.variable_rates(VariableId.link(2, 0), small_state)[1]
        assert small_model.global_intensity(small_state, target) == pytest.approx(expected)
        assert small_model.global_intensity(small_state, _toggled(target, 2, 1)) == 0.0

    def test_constant_exit_rate(self, hidden_model):
        variables = hidden_model.definition.variables()
        q = build_joint_generator(hidden_model, variables)
        assert np.allclose(-np.diag(q.q), hidden_model.total_exit_rate())


@pytest.mark.model
class TestDependencySets:
    """Context-sensitive parent sets."""

    @pytest.mark.parametrize("model_name", ["small_model", "hidden_model"])
    def test_variables_outside_the_set_do_not_matter(self, model_name, request, rng):
        model = request.getfixturevalue(model_name)
        d = model.definition
        for _ in range(3):
            state = sample_initial_state(model, rng)
            state.y[rng.random(state.y.shape) < 0.4] = 1
            np.fill_diagonal(state.y, 0)
            for v in d.variables():
                parents = model.dependency_set(v, state)
                assert v not in parents
                base = _cim_entries(model, v, state)
                for w in d.variables():
                    if w == v or w in parents:
                        continue
                    for value in model.state_values(w):
                        if value == state.get(w):
                            continue
                        other = state.copy()
                        other.set(w, value)
                        assert np.allclose(_cim_entries(model, v, other), base), f"{v} reads {w}"

    @pytest.mark.parametrize("model_name", ["small_model", "hidden_model"])
    def test_dependents_invert_dependency_sets(self, model_name, request, rng):
        model = request.getfixturevalue(model_name)
        variables = model.definition.variables()
        state = sample_initial_state(model, rng)
        state.y[0, 1] = state.y[1, 0] = 1
        for v in variables:
            dependents = model.dependents(v, state)
            for w in variables:
                if w != v:
                    assert (w in dependents) == (v in model.dependency_set(w, state)), f"{v} / {w}"

    def test_attribute_parents_follow_current_links(self, small_model, small_state):
        parents = small_model.dependency_set(VariableId.attribute(0, 0), small_state)
        assert VariableId.attribute(0, 1) in parents, "actor 0 links to actor 1"
        assert VariableId.attribute(0, 2) not in parents, "actor 0 does not link to actor 2"
        assert VariableId.link(0, 2) in parents

    def test_network_similarity_reads_every_attribute(self, small_model, small_state):
        parents = small_model.dependency_set(VariableId.link(2, 0), small_state)
        assert {VariableId.attribute(0, k) for k in range(3)} <= parents

    def test_affected_decisions_include_owner(self, small_model, small_state):
        keys = small_model.affected_decisions(VariableId.link(2, 1), small_state)
        assert (-1, 2) in keys
        assert (0, 2) in keys, "attribute similarity of actor 2 reads its links"


@pytest.mark.model
class TestModelSetup:
    """Definitions and parameter validation."""

    def test_definition_validation(self):
        with pytest.raises(InvalidModelError):
            ModelDefinition(1)
        with pytest.raises(InvalidModelError):
            ModelDefinition(2, (), (EffectSpec.network("similarity", 0),))
        with pytest.raises(InvalidModelError):
            ModelDefinition(2, link_prior=1.5)

    def test_params_validation(self, small_definition):
        with pytest.raises(InvalidModelError):
            ModelParams.shared(3, -1.0)
        with pytest.raises(InvalidModelError):
            ModelParams.shared(3, 1.0, 1.0, [0.0], [0.0, 0.0]).check(small_definition)
        with pytest.raises(InvalidModelError):
            ModelParams.shared(3, math.nan)

    def test_state_validation(self):
        with pytest.raises(InvalidModelError):
            NetworkState(np.array([[1, 0], [0, 0]]))
        with pytest.raises(InvalidModelError):
            NetworkState(np.zeros((2, 2)), np.array([[0, 5]]), (AttributeSpec("a", 0, 3),))
        with pytest.raises(InvalidModelError):
            AttributeSpec("a", 2, 1)

    def test_initial_prior(self, pair_model):
        state = NetworkState(np.array([[0, 1], [0, 0]]))
        assert pair_model.initial_log_prior(state) == pytest.approx(math.log(0.3) + math.log(0.7))


@pytest.mark.model
class TestSimulation:
    """Forward sampling."""

    def test_deterministic_given_seed(self, small_model, small_state):
        a = simulate(small_model, small_state, 10.0, np.random.default_rng(3))
        b = simulate(small_model, small_state, 10.0, np.random.default_rng(3))
        assert a.trajectory == b.trajectory
        assert a.log_density == b.log_density

    def test_forward_sample_is_the_simulated_path(self, small_model, small_state):
        traj = forward_sample(small_model, small_state, 6.0, np.random.default_rng(9))
        assert traj == simulate(small_model, small_state, 6.0, np.random.default_rng(9)).trajectory

    def test_zero_horizon(self, small_model, small_state):
        result = simulate(small_model, small_state, 0.0, np.random.default_rng(0))
        assert len(result.trajectory) == 0
        assert result.trajectory.initial == small_state.to_assignment()

    def test_initial_state_untouched(self, small_model, small_state):
        before = small_state.copy()
        simulate(small_model, small_state, 5.0, np.random.default_rng(0))
        assert np.array_equal(before.y, small_state.y) and np.array_equal(before.z, small_state.z)

    def test_paths_respect_ranges(self, small_model, small_state):
        traj = simulate(small_model, small_state, 20.0, np.random.default_rng(5)).trajectory
        for tr in traj.transitions:
            if tr.variable.is_attribute:
                assert abs(tr.new_state - tr.old_state) == 1
                assert 0 <= tr.new_state <= 2
        times = [tr.time for tr in traj.transitions]
        assert all(b > a for a, b in zip(times, times[1:]))

    @pytest.mark.acceptance
    def test_likelihood_identity(self, small_model):
        rng = np.random.default_rng(11)
        for _ in range(100):
            initial = sample_initial_state(small_model, rng)
            result = simulate(small_model, initial, 5.0, rng)
            replay = small_model.trajectory_log_likelihood(result.trajectory)
            assert replay.is_possible
            assert abs(replay.value - result.log_density) < 1e-8

    def test_end_state_distribution_matches_oracle(self, pair_model):
        variables = pair_model.definition.variables()
        states = joint_states(pair_model, variables)
        kernel = exact_transition_kernel(build_joint_generator(pair_model, variables), 1.5)
        initial = NetworkState.empty(2)
        rng = np.random.default_rng(21)
        n = 4000
        counts = np.zeros(len(states))
        for _ in range(n):
            final = simulate(pair_model, initial, 1.5, rng).trajectory.final_state()
            counts[states.index(tuple(final[v] for v in variables))] += 1
        expected = kernel[states.index((0, 0))]
        se = np.sqrt(expected * (1 - expected) / n)
        assert np.all(np.abs(counts / n - expected) < 4 * se + 1e-3)

    def test_summary_counts(self, small_model, small_state):
        traj = simulate(small_model, small_state, 8.0, np.random.default_rng(9)).trajectory
        summary = small_model.summarize(traj)
        links = sum(tr.variable.is_link for tr in traj.transitions)
        assert summary.network_counts.sum() == links
        assert summary.attribute_counts.sum() == len(traj) - links
        assert np.allclose(summary.network_exposure, 8.0)
        assert len(summary.network) == links
