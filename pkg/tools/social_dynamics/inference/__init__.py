"""Sampling trajectories conditioned on partial evidence."""

from .diagnostics import DiagnosticsLog, read_diagnostics
from .hidden import (
    EventStream,
    HiddenNetworkSampler,
    MHState,
    ObservationParams,
    event_log_likelihood,
    initial_consistent_trajectory,
    mh_run,
    mh_step,
    observation_statistics,
    posterior_link_marginals,
    simulate_event_stream,
    smoothed_link_marginals,
)
from .importance import (
    ImportanceSampler,
    ProposalConfig,
    WeightedTrajectory,
    effective_sample_size,
    estimate_expectation,
    normalized_weights,
    propose_trajectory,
    weight_diagnostics,
)

__all__ = [
    "DiagnosticsLog",
    "EventStream",
    "HiddenNetworkSampler",
    "ImportanceSampler",
    "MHState",
    "ObservationParams",
    "ProposalConfig",
    "WeightedTrajectory",
    "effective_sample_size",
    "estimate_expectation",
    "event_log_likelihood",
    "initial_consistent_trajectory",
    "mh_run",
    "mh_step",
    "normalized_weights",
    "observation_statistics",
    "posterior_link_marginals",
    "propose_trajectory",
    "read_diagnostics",
    "simulate_event_stream",
    "smoothed_link_marginals",
    "weight_diagnostics",
]
