"""
Tests for evidence-constrained importance sampling.
"""

import math

import numpy as np
import pytest
from scipy import stats

from social_dynamics.core.evidence import Evidence, IntervalObservation, PointObservation, snapshot_evidence
from social_dynamics.core.evidence import validate_trajectory_against_evidence
from social_dynamics.core.oracle import build_joint_generator, exact_transition_kernel, joint_states
from social_dynamics.core.variables import VariableId
from social_dynamics.exceptions import DegenerateSampleSetError, EvidenceError
from social_dynamics.inference.importance import (
    ImportanceSampler,
    ProposalConfig,
    WeightedTrajectory,
    effective_sample_size,
    estimate_expectation,
    log_weights,
    normalized_weights,
    propose_trajectory,
    weight_diagnostics,
)
from social_dynamics.model.simulation import sample_initial_state, simulate

Y01 = VariableId.link(0, 1)
Y10 = VariableId.link(1, 0)


def _end_point_evidence(t_end: float = 2.0) -> Evidence:
    return Evidence([PointObservation(t_end, Y01, 1), PointObservation(t_end, Y10, 0)], t_end)


@pytest.mark.inference
class TestProposal:
    """Sampling conforms to evidence and stays reproducible."""

    def test_config_bounds(self):
        with pytest.raises(ValueError):
            ProposalConfig(rate_scale=0.0)
        with pytest.raises(ValueError):
            ProposalConfig(rate_scale=1.5)
        with pytest.raises(ValueError):
            ProposalConfig(max_steps=0)

    def test_unknown_variable_rejected(self, pair_model):
        evidence = Evidence([PointObservation(1.0, VariableId.attribute(0, 0), 1)], 1.0)
        with pytest.raises(EvidenceError):
            ImportanceSampler(pair_model, evidence)

    def test_window_must_cover_evidence(self, pair_model):
        with pytest.raises(EvidenceError):
            ImportanceSampler(pair_model, _end_point_evidence(2.0), t_end=1.0)

    def test_single_draw_matches_sampler(self, pair_model):
        evidence = _end_point_evidence(2.0)
        draw = propose_trajectory(pair_model, evidence, 2.0, ProposalConfig(), np.random.default_rng(12))
        same = ImportanceSampler(pair_model, evidence, 2.0, ProposalConfig()).sample(np.random.default_rng(12))
        assert draw.failure == same.failure
        assert draw.trajectory == same.trajectory
        if not draw.is_failure:
            assert draw.log_weight == pytest.approx(same.log_weight)

    def test_samples_conform_to_snapshots(self, small_model, small_state):
        truth = simulate(small_model, small_state, 3.0, np.random.default_rng(8)).trajectory
        evidence = snapshot_evidence(truth.snapshot([0.0, 1.5, 3.0]))
        samples = ImportanceSampler(small_model, evidence).sample_many(40, seed=1)
        good = [s for s in samples if not s.is_failure]
        assert good, "every proposal failed"
        for s in good:
            assert math.isfinite(s.log_weight)
            assert validate_trajectory_against_evidence(s.trajectory, evidence) == []

    def test_interval_evidence_is_held(self, pair_model):
        evidence = Evidence([IntervalObservation(Y01, 0.5, 1.5, 1)], 2.0)
        samples = ImportanceSampler(pair_model, evidence).sample_many(30, seed=4)
        for s in samples:
            if s.is_failure:
                continue
            for t in (0.5, 0.9, 1.2, 1.5):
                assert s.trajectory.value_at(Y01, t) == 1

    def test_initial_observation_is_used(self, pair_model):
        evidence = Evidence([PointObservation(0.0, Y01, 1), PointObservation(0.0, Y10, 1)], 1.0)
        for s in ImportanceSampler(pair_model, evidence).sample_many(10, seed=2):
            assert s.trajectory.initial == {Y01: 1, Y10: 1}

    def test_deterministic_given_seed(self, small_model, small_state):
        truth = simulate(small_model, small_state, 2.0, np.random.default_rng(3)).trajectory
        sampler = ImportanceSampler(small_model, snapshot_evidence(truth.snapshot([0.0, 2.0])))
        a = sampler.sample_many(15, seed=99)
        b = sampler.sample_many(15, seed=99)
        assert [s.log_weight for s in a] == [s.log_weight for s in b]
        assert all(x.trajectory == y.trajectory for x, y in zip(a, b) if not x.is_failure)

    def test_unit_scale_without_evidence_matches_forward_sampling(self, pair_model):
        sampler = ImportanceSampler(pair_model, Evidence([], 40.0), config=ProposalConfig(rate_scale=1.0))
        samples = sampler.sample_many(2000, seed=17)
        assert np.allclose(log_weights(samples), 0.0), "proposal equals the target"
        first = [s.trajectory.transitions[0].time for s in samples if len(s.trajectory)]
        rate = pair_model.total_exit_rate()
        assert stats.kstest(first, "expon", args=(0, 1.0 / rate)).pvalue > 0.01

        rng = np.random.default_rng(17)
        forward = [len(simulate(pair_model, sample_initial_state(pair_model, rng), 40.0, rng).trajectory)
                   for _ in range(2000)]
        proposed = [len(s.trajectory) for s in samples]
        assert np.mean(proposed) == pytest.approx(np.mean(forward), rel=0.05)


@pytest.mark.inference
class TestWeights:
    """Weight normalisation and estimators."""

    def test_all_failures_are_degenerate(self):
        with pytest.raises(DegenerateSampleSetError):
            normalized_weights([WeightedTrajectory(None, -math.inf, "stuck")] * 3)
        with pytest.raises(DegenerateSampleSetError):
            normalized_weights([])

    def test_failures_get_zero_weight(self, pair_model):
        good = ImportanceSampler(pair_model, _end_point_evidence()).sample_many(5, seed=0)
        good = [s for s in good if not s.is_failure]
        mixed = good + [WeightedTrajectory(None, 0.0, "gave up")]
        w = normalized_weights(mixed)
        assert w[-1] == 0.0
        assert w.sum() == pytest.approx(1.0)

    def test_expectation_with_equal_weights_is_the_mean(self, pair_model):
        trajectories = [simulate(pair_model, pair_model.state_from({Y01: 0, Y10: 0}), 3.0,
                                 np.random.default_rng(k)).trajectory for k in range(10)]
        samples = [WeightedTrajectory(t, 0.0) for t in trajectories]
        estimate = estimate_expectation(len, samples)
        assert float(estimate) == pytest.approx(np.mean([len(t) for t in trajectories]))
        assert effective_sample_size(samples) == pytest.approx(10.0)

    def test_diagnostics_record(self, pair_model):
        samples = ImportanceSampler(pair_model, _end_point_evidence()).sample_many(50, seed=6)
        record = weight_diagnostics(samples)
        assert record["sample_count"] == 50
        assert record["finite_count"] + record["failures"] == 50
        assert 1.0 <= record["effective_sample_size"] <= 50.0


@pytest.mark.inference
@pytest.mark.slow
@pytest.mark.acceptance
class TestPosteriorAccuracy:
    """Importance estimates against the exact two-actor posterior."""

    def test_mid_window_link_marginal(self, pair_model):
        t_end, t_query = 2.0, 1.0
        variables = pair_model.definition.variables()
        states = joint_states(pair_model, variables)
        generator = build_joint_generator(pair_model, variables)
        p0 = pair_model.definition.link_prior
        prior = np.array([np.prod([p0 if x else 1 - p0 for x in s]) for s in states])
        end = states.index(tuple({Y01: 1, Y10: 0}[v] for v in variables))
        joint = (prior @ exact_transition_kernel(generator, t_query)) * \
            exact_transition_kernel(generator, t_end - t_query)[:, end]
        posterior = joint / joint.sum()
        pos = variables.index(Y01)
        exact = sum(p for s, p in zip(states, posterior) if s[pos] == 1)

        samples = ImportanceSampler(pair_model, _end_point_evidence(t_end)).sample_many(10_000, seed=2024)
        estimate = float(estimate_expectation(lambda tr: tr.value_at(Y01, t_query), samples))
        se = math.sqrt(exact * (1 - exact) / effective_sample_size(samples))
        assert abs(estimate - exact) < 3 * se, f"estimate {estimate:.4f} vs exact {exact:.4f} (se {se:.4f})"
