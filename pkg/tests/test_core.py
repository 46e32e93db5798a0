"""
Tests for the continuous-time process primitives.

Test Categories:
    - Variable identities
    - Holding-time samplers (KS checks)
    - Intensity matrices
    - Trajectories and evidence
    - Sufficient statistics and likelihood
    - Exact oracle
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from social_dynamics.core.distributions import (
    exponential_quantile,
    log1mexp,
    sample_exponential,
    sample_truncated_exponential,
    spawn_streams,
    truncated_exponential_cdf,
    truncated_exponential_quantile,
)
from social_dynamics.core.evidence import (
    Evidence,
    FullyObservedVariable,
    IntervalObservation,
    PointObservation,
    fully_observed,
    snapshot_evidence,
    validate_trajectory_against_evidence,
)
from social_dynamics.core.intensity import IntensityMatrix
from social_dynamics.core.oracle import build_joint_generator, exact_transition_kernel, joint_states
from social_dynamics.core.statistics import collect_sufficient_stats, log_likelihood
from social_dynamics.core.trajectory import Trajectory, TrajectoryBuilder, Transition
from social_dynamics.core.variables import VariableId, VariableKind
from social_dynamics.exceptions import (
    EvidenceError,
    InvalidModelError,
    InvalidRateError,
    StateSpaceTooLargeError,
)

Y01 = VariableId.link(0, 1)
Y10 = VariableId.link(1, 0)


def two_link_trajectory() -> Trajectory:
    builder = TrajectoryBuilder({Y01: 0, Y10: 1})
    builder.add(1.0, Y01, 1)
    builder.add(2.5, Y10, 0)
    builder.add(3.0, Y01, 0)
    return builder.build(5.0)


@pytest.mark.core
class TestVariableId:
    """Variable identities and their textual form."""

    def test_self_relation_rejected(self):
        with pytest.raises(InvalidModelError):
            VariableId.link(2, 2)
        with pytest.raises(InvalidModelError):
            VariableId.obs(1, 1)

    def test_attribute_may_share_indices(self):
        v = VariableId.attribute(0, 0)
        assert v.kind == VariableKind.ATTRIBUTE
        assert v.actor == 0

    def test_text_round_trip(self):
        for v in (VariableId.link(3, 1), VariableId.attribute(1, 4), VariableId.obs(0, 2)):
            assert VariableId.parse(str(v)) == v, f"{v} did not survive parse(str())"

    def test_bounds(self):
        VariableId.link(0, 2).check_bounds(3)
        with pytest.raises(InvalidModelError):
            VariableId.link(0, 3).check_bounds(3)
        with pytest.raises(InvalidModelError):
            VariableId.attribute(1, 0).check_bounds(3, 1)

    def test_order_is_kind_then_indices(self):
        ordered = sorted([VariableId.attribute(0, 0), VariableId.link(1, 0), VariableId.link(0, 1)])
        assert ordered == [VariableId.link(0, 1), VariableId.link(1, 0), VariableId.attribute(0, 0)]


@pytest.mark.core
class TestDistributions:
    """Exponential and truncated exponential samplers."""

    def test_invalid_rates(self, rng):
        with pytest.raises(InvalidRateError):
            sample_exponential(0.0, rng)
        with pytest.raises(InvalidRateError):
            sample_exponential(-1.0, rng)
        with pytest.raises(InvalidRateError):
            sample_truncated_exponential(1.0, 0.0, rng)
        with pytest.raises(InvalidRateError):
            sample_truncated_exponential(0.0, 1.0, rng)

    def test_exponential_quantile_values(self):
        assert exponential_quantile(2.0, 0.0) == 0.0
        assert exponential_quantile(2.0, 1 - math.exp(-1)) == pytest.approx(0.5)
        assert exponential_quantile(0.0, 0.3) == math.inf

    def test_exponential_ks(self):
        rng = np.random.default_rng(1)
        draws = [sample_exponential(2.0, rng) for _ in range(10_000)]
        result = stats.kstest(draws, stats.expon(scale=0.5).cdf)
        assert result.pvalue > 0.01, f"KS rejected exponential sampler (p={result.pvalue:.4f})"

    def test_truncated_exponential_ks(self):
        rng = np.random.default_rng(2)
        q, horizon = 1.5, 0.8
        draws = np.array([sample_truncated_exponential(q, horizon, rng) for _ in range(10_000)])
        assert draws.min() >= 0.0 and draws.max() < horizon
        result = stats.kstest(draws, lambda t: truncated_exponential_cdf(q, horizon, t))
        assert result.pvalue > 0.01, f"KS rejected truncated sampler (p={result.pvalue:.4f})"

    def test_truncated_stays_inside_for_extreme_rates(self):
        for q in (1e-9, 1e3):
            t = truncated_exponential_quantile(q, 1.0, 1.0 - 1e-16)
            assert 0.0 <= t < 1.0

    def test_determinism(self):
        a = [sample_exponential(1.0, r) for r in spawn_streams(7, 5)]
        b = [sample_exponential(1.0, r) for r in spawn_streams(7, 5)]
        assert a == b

    @given(st.floats(min_value=1e-8, max_value=50.0))
    def test_log1mexp(self, x):
        assert log1mexp(x) == pytest.approx(math.log(-math.expm1(-x)), rel=1e-9)


@pytest.mark.core
class TestIntensityMatrix:
    """Generator invariants."""

    def test_rows_sum_to_zero(self):
        q = IntensityMatrix.from_rates(np.array([[0, 1.0, 2.0], [0.5, 0, 0], [0, 3.0, 0]]))
        assert np.allclose(q.q.sum(axis=1), 0.0)
        assert q.exit_rate(0) == pytest.approx(3.0)
        assert np.allclose(q.transition_probs(0), [0, 1 / 3, 2 / 3])

    def test_rejects_bad_matrices(self):
        with pytest.raises(InvalidRateError):
            IntensityMatrix(np.array([[-1.0, 1.0], [1.0, -2.0]]))
        with pytest.raises(InvalidRateError):
            IntensityMatrix(np.array([[1.0, -1.0], [1.0, -1.0]]))
        with pytest.raises(InvalidRateError):
            IntensityMatrix(np.array([[0.0]]))

    def test_read_only(self):
        q = IntensityMatrix.two_state(1.0, 2.0)
        with pytest.raises(ValueError):
            q.q[0, 1] = 5.0

    def test_absorbing_state(self):
        q = IntensityMatrix.two_state(0.0, 1.0)
        assert q.exit_rate(0) == 0.0
        assert np.all(q.transition_probs(0) == 0.0)

    @given(st.lists(st.floats(min_value=0.0, max_value=100.0), min_size=9, max_size=9))
    def test_from_rates_is_a_generator(self, values):
        q = IntensityMatrix.from_rates(np.array(values).reshape(3, 3))
        assert np.allclose(q.q.sum(axis=1), 0.0, atol=1e-9)


@pytest.mark.core
class TestTrajectory:
    """Trajectory construction and views."""

    def test_segments_tile_window(self):
        traj = two_link_trajectory()
        assert traj.segments(Y01) == [(0.0, 0), (1.0, 1), (3.0, 0)]
        assert traj.segments(Y10) == [(0.0, 1), (2.5, 0)]

    def test_value_at_is_right_continuous(self):
        traj = two_link_trajectory()
        assert traj.value_at(Y01, 0.999) == 0
        assert traj.value_at(Y01, 1.0) == 1
        assert traj.state_at(2.5) == {Y01: 1, Y10: 0}

    def test_rejects_ties_and_bad_bookkeeping(self):
        with pytest.raises(EvidenceError):
            Trajectory(5.0, {Y01: 0, Y10: 0}, [Transition(1.0, Y01, 0, 1), Transition(1.0, Y10, 0, 1)])
        with pytest.raises(EvidenceError):
            Trajectory(5.0, {Y01: 0}, [Transition(1.0, Y01, 1, 0)])
        with pytest.raises(EvidenceError):
            Trajectory(5.0, {Y01: 0}, [Transition(5.0, Y01, 0, 1)])

    def test_zero_length_window(self):
        traj = Trajectory(0.0, {Y01: 1})
        assert len(traj) == 0
        assert traj.final_state() == {Y01: 1}

    def test_snapshot(self):
        snaps = two_link_trajectory().snapshot([0.0, 2.0, 5.0])
        assert [s for _, s in snaps] == [{Y01: 0, Y10: 1}, {Y01: 1, Y10: 1}, {Y01: 0, Y10: 0}]
        with pytest.raises(EvidenceError):
            two_link_trajectory().snapshot([6.0])

    def test_with_variable_path_replaces_one_path(self):
        traj = two_link_trajectory()
        new = traj.with_variable_path(Y01, 1, [Transition(4.0, Y01, 1, 0)])
        assert new.segments(Y01) == [(0.0, 1), (4.0, 0)]
        assert new.segments(Y10) == traj.segments(Y10)

    def test_with_variable_path_rejects_ties(self):
        with pytest.raises(EvidenceError):
            two_link_trajectory().with_variable_path(Y01, 0, [Transition(2.5, Y01, 0, 1)])

    def test_truncated_and_restricted(self):
        traj = two_link_trajectory()
        assert len(traj.truncated(2.0)) == 1
        assert traj.restricted([Y10]).variables == [Y10]


@pytest.mark.core
class TestEvidence:
    """Evidence construction and consistency."""

    def test_interval_must_lie_inside_window(self):
        with pytest.raises(EvidenceError):
            Evidence([IntervalObservation(Y01, 2.0, 1.0, 0)], 5.0)
        with pytest.raises(EvidenceError):
            Evidence([IntervalObservation(Y01, 1.0, 6.0, 0)], 5.0)

    def test_conflicting_items(self):
        with pytest.raises(EvidenceError):
            Evidence([IntervalObservation(Y01, 0.0, 2.0, 0), IntervalObservation(Y01, 1.0, 3.0, 1)], 5.0)
        with pytest.raises(EvidenceError):
            Evidence([PointObservation(1.0, Y01, 0), PointObservation(1.0, Y01, 1)], 5.0)
        with pytest.raises(EvidenceError):
            Evidence([IntervalObservation(Y01, 0.0, 2.0, 0), PointObservation(1.0, Y01, 1)], 5.0)

    def test_full_observation_clamps_variable(self):
        ev = fully_observed(two_link_trajectory())
        assert ev.is_complete_for([Y01, Y10])
        assert not snapshot_evidence([(0.0, {Y01: 0}), (5.0, {Y01: 1})]).is_complete_for([Y01])

    def test_full_observation_validation(self):
        with pytest.raises(EvidenceError):
            Evidence([FullyObservedVariable(Y01, ((1.0, 0),))], 5.0)
        with pytest.raises(EvidenceError):
            Evidence([FullyObservedVariable(Y01, ((0.0, 0), (1.0, 0)))], 5.0)

    def test_trajectory_agreement(self):
        traj = two_link_trajectory()
        good = snapshot_evidence(traj.snapshot([0.0, 2.0, 5.0]))
        assert validate_trajectory_against_evidence(traj, good) == []
        bad = Evidence([PointObservation(2.0, Y01, 0)], 5.0)
        assert len(validate_trajectory_against_evidence(traj, bad)) == 1


@pytest.mark.core
class TestSufficientStatistics:
    """T / M tallies and the trajectory log-likelihood."""

    def test_durations_sum_to_window(self):
        traj = two_link_trajectory()
        stats_ = collect_sufficient_stats(traj, lambda v, s: s[Y10] if v == Y01 else s[Y01])
        for v in (Y01, Y10):
            assert stats_[v].total_time == pytest.approx(traj.t_end)

    def test_context_split(self):
        traj = two_link_trajectory()
        stats_ = collect_sufficient_stats(traj, lambda v, s: s[Y10] if v == Y01 else s[Y01])
        st01 = stats_[Y01]
        assert st01.T(0, u=1) == pytest.approx(1.0)
        assert st01.T(1, u=1) == pytest.approx(1.5)
        assert st01.T(1, u=0) == pytest.approx(0.5)
        assert st01.T(0, u=0) == pytest.approx(2.0)
        assert st01.M(0, 1, u=1) == 1
        assert st01.M(1, 0, u=0) == 1
        assert st01.M(1, u=0) == st01.M(1, 0, u=0)

    def test_log_likelihood_matches_closed_form(self):
        traj = two_link_trajectory()
        q = IntensityMatrix.two_state(0.7, 1.3)
        value = log_likelihood(collect_sufficient_stats(traj), lambda v, u: q).value
        expected = 0.0
        for v in (Y01, Y10):
            segs = traj.segments(v) + [(traj.t_end, None)]
            for (s, x), (e, _) in zip(segs, segs[1:]):
                expected -= q.exit_rate(x) * (e - s)
            for tr in traj.transitions_of(v):
                expected += math.log(q.rate(tr.old_state, tr.new_state))
        assert value == pytest.approx(expected, abs=1e-12)

    def test_zero_rate_transition_is_flagged(self):
        q = IntensityMatrix.two_state(0.0, 1.0)
        result = log_likelihood(collect_sufficient_stats(two_link_trajectory()), lambda v, u: q)
        assert result.value == -math.inf
        assert not result.is_possible
        assert (Y01, (), 0, 1) in result.impossible

    def test_merge_pools_tallies(self):
        a = collect_sufficient_stats(two_link_trajectory())
        merged = a.merge(a)
        assert merged[Y01].total_time == pytest.approx(10.0)
        assert merged[Y01].total_transitions == 2 * a[Y01].total_transitions


class _IndependentFlips:
    """Two-state variables flipping up at ``a`` and down at ``b``."""

    def __init__(self, a: float, b: float):
        self.a, self.b = a, b

    def state_values(self, variable):
        return (0, 1)

    def intensity(self, state, variable, new_value):
        return self.a if new_value == 1 else self.b


@pytest.mark.core
class TestOracle:
    """Joint generator and uniformized matrix exponential."""

    def test_single_variable_kernel_closed_form(self):
        a, b, t = 0.7, 1.9, 1.3
        q = build_joint_generator(_IndependentFlips(a, b), [Y01])
        kernel = exact_transition_kernel(q, t)
        p01 = a / (a + b) * (1 - math.exp(-(a + b) * t))
        assert kernel[0, 1] == pytest.approx(p01, abs=1e-10)
        assert np.allclose(kernel.sum(axis=1), 1.0)

    def test_product_structure(self):
        model = _IndependentFlips(0.4, 0.9)
        joint = exact_transition_kernel(build_joint_generator(model, [Y01, Y10]), 2.0)
        single = exact_transition_kernel(build_joint_generator(model, [Y01]), 2.0)
        assert np.allclose(joint, np.kron(single, single), atol=1e-10)

    def test_long_horizon_reaches_stationarity(self):
        a, b = 3.0, 1.0
        kernel = exact_transition_kernel(build_joint_generator(_IndependentFlips(a, b), [Y01]), 500.0)
        assert np.allclose(kernel, [[b / (a + b), a / (a + b)]] * 2, atol=1e-8)

    def test_zero_duration_is_identity(self):
        q = build_joint_generator(_IndependentFlips(1.0, 1.0), [Y01])
        assert np.allclose(exact_transition_kernel(q, 0.0), np.eye(2))

    def test_state_cap(self):
        with pytest.raises(StateSpaceTooLargeError):
            joint_states(_IndependentFlips(1.0, 1.0), [VariableId.link(0, k) for k in range(1, 6)], cap=16)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.01, max_value=5.0), st.floats(min_value=0.01, max_value=5.0))
    def test_generator_rows_sum_to_zero(self, a, b):
        q = build_joint_generator(_IndependentFlips(a, b), [Y01, Y10])
        assert np.allclose(q.q.sum(axis=1), 0.0, atol=1e-12)
