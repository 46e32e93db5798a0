"""
Monte Carlo EM for the hidden network model.

The E-step runs the Metropolis-Hastings chain over link trajectories and
keeps equally weighted samples; the M-step updates the network rates and
weights as for snapshot data and the event rates in closed form. The chain
continues from its last state across iterations.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.trajectory import Trajectory
from ..exceptions import EstimationError, InvalidModelError
from ..inference.diagnostics import DiagnosticsLog
from ..inference.hidden import (
    DEFAULT_BURN_IN,
    DEFAULT_THIN,
    EventStream,
    HiddenNetworkSampler,
    ObservationParams,
    initial_consistent_trajectory,
    observation_statistics,
)
from ..model.coevolution import CoevolutionModel
from ..model.params import ModelDefinition, ModelParams
from .objective import DEFAULT_GTOL, DEFAULT_RATE_FLOOR, ExpectedStatistics, expected_complete_loglik, rate_step, weight_step
from .result import FitResult

logger = logging.getLogger(__name__)

CONTEXTS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass
class HiddenEMConfig:
    """
    Hidden-model EM settings.

    Args:
        max_iters: EM iterations
        samples_per_iter: Chain samples per E-step
        initial_burn_in: Steps discarded before the first E-step
        burn_in: Steps discarded at the start of every later E-step
        thin: Steps between kept samples
        rate_scale: Proposal rate factor of the chain
        initial_rate: Starting network rate
        tolerance: Largest parameter change that counts as converged
        seed: Chain seed
        rate_floor: Lower bound on updated rates
        gtol: Gradient tolerance of the weight optimiser
        progress: Show progress bars
    """

    max_iters: int = 20
    samples_per_iter: int = 50
    initial_burn_in: int = DEFAULT_BURN_IN
    burn_in: int = DEFAULT_THIN
    thin: int = DEFAULT_THIN
    rate_scale: float = 1.0
    initial_rate: float = 0.1
    tolerance: float = 1e-2
    seed: Optional[int] = None
    rate_floor: float = DEFAULT_RATE_FLOOR
    gtol: float = DEFAULT_GTOL
    progress: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or self.samples_per_iter < 1 or self.thin < 1:
            raise ValueError("max_iters, samples_per_iter and thin must be positive")
        if self.initial_burn_in < 0 or self.burn_in < 0:
            raise ValueError("burn-in lengths must be non-negative")
        if not 0.0 < self.rate_scale <= 1.0:
            raise ValueError(f"rate_scale must lie in (0, 1], got {self.rate_scale}")
        if self.tolerance <= 0 or self.rate_floor <= 0 or self.initial_rate <= 0:
            raise ValueError("tolerance, rate floor and initial rate must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def estimate_observation_rates(trajectories: Sequence[Trajectory], events: EventStream,
                               previous: Optional[ObservationParams] = None) -> Tuple[ObservationParams, List[Tuple[int, int]]]:
    """
    Closed-form event rates: pooled event counts over pooled context durations.

    Contexts never visited keep their previous rate (or the overall event
    rate when there is none) and are reported.

    Returns:
        tuple: ``(ObservationParams, unvisited contexts)``
    """
    counts = np.zeros((2, 2))
    durations = np.zeros((2, 2))
    for traj in trajectories:
        c, d = observation_statistics(traj, events)
        counts += c
        durations += d
    fallback = previous.rates if previous is not None else np.full((2, 2), counts.sum() / max(durations.sum(), 1e-12))
    rates = np.where(durations > 0, counts / np.where(durations > 0, durations, 1.0), fallback)
    unvisited = [(k, l) for k, l in CONTEXTS if durations[k, l] <= 0]
    if not np.any(rates > 0):
        raise EstimationError("no events to estimate observation rates from", {"events": len(events)})
    return ObservationParams(rates), unvisited


def hidden_mcem_fit(events: EventStream, definition: ModelDefinition, config: Optional[HiddenEMConfig] = None,
                    params: Optional[ModelParams] = None, observation: Optional[ObservationParams] = None,
                    diagnostics: Optional[DiagnosticsLog] = None) -> FitResult:
    """
    Fit network and event parameters to an event stream.

    Args:
        events: Observed events
        definition: Link-only model skeleton
        config: EM settings
        params: Starting network parameters
        observation: Starting event rates (closed form on the start trajectory by default)
        diagnostics: Sink for per-iteration chain diagnostics

    Returns:
        FitResult: With ``observation`` set
    """
    if len(events) == 0:
        raise EstimationError("the event stream is empty", {"events": 0})
    if definition.n_attributes:
        raise InvalidModelError("the hidden network model has no attributes")
    config = config or HiddenEMConfig()
    log = diagnostics or DiagnosticsLog()
    rng = np.random.default_rng(config.seed)
    trajectory = initial_consistent_trajectory(events)
    if observation is None:
        observation, _ = estimate_observation_rates([trajectory], events)
    params = (params or ModelParams.initial(definition, config.initial_rate)).check(definition)
    model = CoevolutionModel(definition, params)
    sampler = HiddenNetworkSampler(model, observation, events, config.rate_scale)
    state = sampler.initial_state(trajectory)
    if config.initial_burn_in:
        state = sampler.run(state, config.initial_burn_in, 0, 1, rng, config.progress).final

    trace: List[Dict[str, Any]] = []
    flags: List[str] = []
    acceptance: List[float] = []
    converged = False
    for iteration in range(1, config.max_iters + 1):
        run = sampler.run(state, config.burn_in, config.samples_per_iter, config.thin, rng, config.progress)
        acceptance.append(run.acceptance_rate)
        log.write("mh_run", iteration=iteration, **run.diagnostics)
        summaries = [model.summarize(t) for t in run.samples]
        stats = ExpectedStatistics.pool(summaries)
        new_params = rate_step(params, stats, definition.shared_rates, config.rate_floor)
        new_params, wstep = weight_step(new_params, stats, config.gtol)
        new_obs, unvisited = estimate_observation_rates(run.samples, events, observation)
        for k, l in unvisited:
            flags.append(f"iteration {iteration}: context ({k},{l}) never visited; rate held")
        change = max(new_params.distance(params), float(np.abs(new_obs.rates - observation.rates).max()))
        params, observation = new_params, new_obs
        record = {"iteration": iteration, "expected_loglik": expected_complete_loglik(params, stats),
                  "acceptance_rate": run.acceptance_rate, "parameter_change": change,
                  "gradient_norm": wstep.gradient_norm,
                  **{f"q{k}{l}": observation.rate(k, l) for k, l in CONTEXTS}}
        trace.append(record)
        logger.info("Hidden EM iteration %d: change %.4g, acceptance %.3f", iteration, change, run.acceptance_rate)
        model = model.with_params(params)
        sampler = HiddenNetworkSampler(model, observation, events, config.rate_scale)
        state = sampler.initial_state(run.final.trajectory)
        if change < config.tolerance:
            converged = True
            break

    if not converged:
        flags.append(f"no convergence after {config.max_iters} iterations")
        logger.warning("Hidden EM stopped without converging")
    return FitResult(params, converged, trace,
                     {"flags": flags, "acceptance_rate": acceptance, "events": len(events)},
                     observation=observation, method="hidden")
