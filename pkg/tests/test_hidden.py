"""
Tests for the hidden-network observation model and its MCMC sampler.

Test Categories:
    - Observation rates and event streams
    - Event likelihood given link paths
    - Metropolis-Hastings over hidden link trajectories
"""

import math

import numpy as np
import pytest

from social_dynamics.core.trajectory import TrajectoryBuilder
from social_dynamics.core.variables import VariableId
from social_dynamics.exceptions import EvidenceError, InvalidModelError
from social_dynamics.inference.hidden import (
    EventStream,
    HiddenNetworkSampler,
    ObservationParams,
    context_counts,
    context_durations,
    event_log_likelihood,
    initial_consistent_trajectory,
    link_marginals,
    mh_run,
    mh_step,
    observation_statistics,
    posterior_link_marginals,
    simulate_event_stream,
    smoothed_link_marginals,
)
from social_dynamics.model.state import NetworkState

PATH_IJ = [(0.0, 0), (2.0, 1)]
PATH_JI = [(0.0, 1), (5.0, 0)]


@pytest.mark.hidden
class TestObservationParams:
    """Event-rate parameters keyed by link context."""

    def test_rejects_invalid_rates(self):
        with pytest.raises(InvalidModelError):
            ObservationParams([[0.1, -0.1], [1.0, 1.0]])
        with pytest.raises(InvalidModelError):
            ObservationParams(np.zeros((2, 2)))

    @pytest.mark.parametrize("keys", [("0,0", "0,1", "1,0", "1,1"), ("q00", "q01", "q10", "q11"),
                                      ("00", "01", "10", "11")])
    def test_key_forms(self, keys):
        obs = ObservationParams.from_dict(dict(zip(keys, (0.002, 0.023, 0.296, 0.604))))
        assert obs.rate(0, 1) == 0.023
        assert obs.rate(1, 0) == 0.296
        assert obs.as_dict() == {"0,0": 0.002, "0,1": 0.023, "1,0": 0.296, "1,1": 0.604}

    def test_bad_key(self):
        with pytest.raises(ValueError):
            ObservationParams.from_dict({"2,0": 1.0})

    def test_observation_cim_is_symmetric(self, observation):
        cim = observation.cim(1, 0)
        assert cim.rate(0, 1) == cim.rate(1, 0) == 2.0


@pytest.mark.hidden
class TestEventStream:
    """Event stream validation and indexing."""

    def test_sorted_and_indexed(self, tiny_stream):
        assert len(tiny_stream) == 6
        assert np.all(np.diff(tiny_stream.times) > 0)
        assert tiny_stream.for_pair(0, 1).tolist() == [0.5, 2.0, 7.0]
        assert tiny_stream.for_pair(2, 1).size == 0
        assert tiny_stream.pairs() == [(0, 1), (1, 0), (1, 2), (2, 0)]
        counts = tiny_stream.count_matrix()
        assert counts[0, 1] == 3 and counts.sum() == 6

    @pytest.mark.parametrize("events", [
        [(1.0, 0, 1), (1.0, 1, 0)],
        [(1.0, 1, 1)],
        [(10.0, 0, 1)],
        [(-0.5, 0, 1)],
        [(1.0, 0, 3)],
    ])
    def test_invalid_streams(self, events):
        with pytest.raises(EvidenceError):
            EventStream(events, 3, 10.0)

    def test_roster_must_match(self):
        with pytest.raises(EvidenceError):
            EventStream([(1.0, 0, 1)], 3, 10.0, ["ann", "bob"])


@pytest.mark.hidden
class TestEventLikelihood:
    """Closed-form event log-density."""

    def test_context_durations(self):
        durations = context_durations(PATH_IJ, PATH_JI, 10.0)
        assert durations.tolist() == [[0.0, 2.0], [5.0, 3.0]]
        assert context_durations(PATH_IJ, PATH_JI, 10.0, t_start=4.0).tolist() == [[0.0, 0.0], [5.0, 1.0]]

    def test_context_counts(self):
        counts = context_counts(np.array([1.0, 3.0, 6.0, 7.0]), PATH_IJ, PATH_JI)
        assert counts.tolist() == [[0.0, 1.0], [2.0, 1.0]]

    def test_closed_form(self, observation):
        result = event_log_likelihood(np.array([1.0, 3.0, 6.0]), PATH_IJ, PATH_JI, observation, 10.0)
        expected = -(0.2 * 2 + 3.0 * 3 + 2.0 * 5) + math.log(0.2) + math.log(3.0) + math.log(2.0)
        assert result.is_possible
        assert result.value == pytest.approx(expected, rel=1e-12)

    def test_event_in_silent_context_is_impossible(self):
        silent_01 = ObservationParams([[1.0, 0.0], [1.0, 1.0]])
        result = event_log_likelihood(np.array([1.0]), PATH_IJ, PATH_JI, silent_01, 10.0)
        assert not result.is_possible
        assert result.impossible[0][:2] == ("event", 1.0)
        assert event_log_likelihood(np.array([6.0]), PATH_IJ, PATH_JI, silent_01, 10.0).is_possible

    def test_pooled_statistics(self, tiny_stream):
        start = initial_consistent_trajectory(tiny_stream)
        assert len(start) == 0
        assert start.t_end == 10.0
        counts, durations = observation_statistics(start, tiny_stream)
        assert counts[1, 1] == 6 and counts.sum() == 6
        assert durations[1, 1] == pytest.approx(60.0)
        assert durations.sum() == pytest.approx(3 * 2 * 10.0)

    def test_silent_pairs_start_without_links(self):
        stream = EventStream([(1.0, 0, 1)], 3, 5.0)
        start = initial_consistent_trajectory(stream)
        assert start.initial[VariableId.link(0, 1)] == 1
        assert start.initial[VariableId.link(1, 0)] == 1
        assert start.initial[VariableId.link(0, 2)] == 0


@pytest.mark.hidden
class TestMarginals:
    """Link marginals on a grid."""

    def test_link_marginals_and_average(self):
        v = VariableId.link(0, 1)
        initial = {v: 0, VariableId.link(1, 0): 0}
        a = TrajectoryBuilder(initial)
        a.add(2.0, v, 1)
        traj_a = a.build(4.0)
        traj_b = TrajectoryBuilder(initial).build(4.0)
        grid = [1.0, 3.0]
        assert link_marginals(traj_a, grid, 2)[:, 0, 1].tolist() == [0.0, 1.0]
        averaged = posterior_link_marginals([traj_a, traj_b], grid, 2)
        assert averaged.shape == (2, 2, 2)
        assert averaged[:, 0, 1].tolist() == [0.0, 0.5]
        assert np.all(averaged[:, [0, 1], [0, 1]] == 0.0)

    def test_no_samples(self):
        with pytest.raises(ValueError):
            posterior_link_marginals([], [1.0], 2)


@pytest.mark.hidden
class TestSampler:
    """Metropolis-Hastings chain."""

    def test_rejects_attribute_models(self, small_model, tiny_stream, observation):
        with pytest.raises(InvalidModelError):
            HiddenNetworkSampler(small_model, observation, tiny_stream)

    def test_rejects_mismatched_actors(self, pair_model, tiny_stream, observation):
        with pytest.raises(InvalidModelError):
            HiddenNetworkSampler(pair_model, observation, tiny_stream)

    def test_rate_scale_bounds(self, hidden_model, tiny_stream, observation):
        with pytest.raises(ValueError):
            HiddenNetworkSampler(hidden_model, observation, tiny_stream, rate_scale=0.0)

    def test_proposal_density_matches_sampling(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream, rate_scale=0.7)
        rng = np.random.default_rng(4)
        current = initial_consistent_trajectory(tiny_stream)
        for i, j in sampler.pairs:
            proposed, log_q = sampler.propose(current, i, j, rng)
            assert sampler.proposal_log_density(proposed, i, j) == pytest.approx(log_q, abs=1e-10)
            current = proposed

    def test_acceptance_ratio_is_antisymmetric(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        rng = np.random.default_rng(5)
        current = initial_consistent_trajectory(tiny_stream)
        proposed, _ = sampler.propose(current, 0, 1, rng)
        forward = sampler.log_acceptance_ratio(current, proposed, 0, 1)
        backward = sampler.log_acceptance_ratio(proposed, current, 0, 1)
        if math.isfinite(forward):
            assert forward == pytest.approx(-backward)

    def test_run_schedule_and_cached_terms(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        run = sampler.run(initial_consistent_trajectory(tiny_stream), n_burn=200, n_samples=20, thin=5,
                          rng=np.random.default_rng(6))
        assert len(run.samples) == 20
        assert run.steps == 300
        assert 0.0 < run.acceptance_rate < 1.0
        final = run.final
        assert np.allclose(final.actor_terms, sampler.actor_terms(final.trajectory))
        for (i, j), term in final.pair_terms.items():
            assert term == pytest.approx(sampler.pair_term(final.trajectory, i, j))

    def test_start_ignores_rng(self, tiny_stream):
        plain = initial_consistent_trajectory(tiny_stream)
        assert initial_consistent_trajectory(tiny_stream, rng=np.random.default_rng(0)) == plain
        assert plain.initial[VariableId.link(0, 1)] in (0, 1) and len(plain) == 0

    def test_link_prior_matches_model_prior(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        start = initial_consistent_trajectory(tiny_stream)
        total = sum(sampler.link_prior(x) for x in start.initial.values())
        assert total == pytest.approx(hidden_model.initial_log_prior(hidden_model.state_from(start.initial)))

    def test_single_steps_keep_cached_terms(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        state = sampler.initial_state(initial_consistent_trajectory(tiny_stream))
        rng = np.random.default_rng(7)
        for step in range(1, 41):
            state = mh_step(state, sampler, rng)
            assert state.iteration == step
        assert 0 <= state.accepted <= 40
        assert np.allclose(state.actor_terms, sampler.actor_terms(state.trajectory))
        for (i, j), term in state.pair_terms.items():
            assert term == pytest.approx(sampler.pair_term(state.trajectory, i, j))

    def test_chain_is_deterministic(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        start = initial_consistent_trajectory(tiny_stream)
        a = mh_run(sampler, start, n_burn=50, n_samples=5, thin=3, rng=np.random.default_rng(1))
        b = mh_run(sampler, start, n_burn=50, n_samples=5, thin=3, rng=np.random.default_rng(1))
        assert all(x == y for x, y in zip(a.samples, b.samples))

    def test_invalid_schedule(self, hidden_model, tiny_stream, observation):
        sampler = HiddenNetworkSampler(hidden_model, observation, tiny_stream)
        with pytest.raises(ValueError):
            sampler.run(initial_consistent_trajectory(tiny_stream), 0, 1, 0, np.random.default_rng(0))


@pytest.mark.hidden
class TestEventSimulation:
    """Joint draws of hidden links and their events."""

    def test_stream_inside_window(self, hidden_model, observation):
        links, stream = simulate_event_stream(hidden_model, observation, NetworkState.empty(3), 20.0,
                                              np.random.default_rng(7))
        assert stream.n_actors == 3 and stream.t_end == 20.0
        assert links.t_end == 20.0
        assert len(stream) > 0
        assert np.all((stream.times >= 0) & (stream.times < 20.0))

    def test_seeded(self, hidden_model, observation):
        draws = [simulate_event_stream(hidden_model, observation, NetworkState.empty(3), 10.0,
                                       np.random.default_rng(3)) for _ in range(2)]
        assert draws[0][0] == draws[1][0]
        assert np.array_equal(draws[0][1].times, draws[1][1].times)


@pytest.mark.hidden
@pytest.mark.slow
@pytest.mark.acceptance
class TestPosteriorAgreement:
    """MH marginals against exact forward-backward smoothing."""

    def test_two_actor_marginals(self, pair_model, observation):
        _, stream = simulate_event_stream(pair_model, observation, NetworkState.empty(2), 10.0,
                                          np.random.default_rng(31))
        grid = [(k + 0.5) * 2.0 for k in range(5)]
        exact = smoothed_link_marginals(pair_model, observation, stream, grid)
        sampler = HiddenNetworkSampler(pair_model, observation, stream)
        run = sampler.run(initial_consistent_trajectory(stream), n_burn=2000, n_samples=5000, thin=10,
                          rng=np.random.default_rng(32))
        estimate = posterior_link_marginals(run.samples, grid, 2)
        assert np.all(np.abs(estimate - exact) < 0.02), f"max error {np.abs(estimate - exact).max():.4f}"
