"""Continuous-time Markov process primitives."""

from .distributions import (
    exponential_quantile,
    log1mexp,
    make_rng,
    sample_exponential,
    sample_truncated_exponential,
    spawn_streams,
    truncated_exponential_quantile,
)
from .evidence import (
    Evidence,
    FullyObservedVariable,
    IntervalObservation,
    PointObservation,
    fully_observed,
    snapshot_evidence,
    validate_trajectory_against_evidence,
)
from .intensity import IntensityMatrix
from .oracle import build_joint_generator, exact_transition_kernel, joint_states, smoothed_state_marginals
from .statistics import LogDensity, SufficientStats, collect_sufficient_stats, log_likelihood
from .trajectory import Trajectory, TrajectoryBuilder, Transition
from .variables import VariableId, VariableKind

__all__ = [
    "Evidence",
    "FullyObservedVariable",
    "IntensityMatrix",
    "IntervalObservation",
    "LogDensity",
    "PointObservation",
    "SufficientStats",
    "Trajectory",
    "TrajectoryBuilder",
    "Transition",
    "VariableId",
    "VariableKind",
    "build_joint_generator",
    "collect_sufficient_stats",
    "exact_transition_kernel",
    "exponential_quantile",
    "fully_observed",
    "joint_states",
    "log1mexp",
    "log_likelihood",
    "make_rng",
    "sample_exponential",
    "sample_truncated_exponential",
    "smoothed_state_marginals",
    "snapshot_evidence",
    "spawn_streams",
    "truncated_exponential_quantile",
    "validate_trajectory_against_evidence",
]
