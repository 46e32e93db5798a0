"""
Monte Carlo EM for partially observed co-evolution data.

The E-step draws weighted trajectories that hit every observation; the
M-step maximises the weighted complete-data log-likelihood. Rates and
weights are updated in alternating loops: a few rate-only iterations, then
a few weight-only iterations, each on a fresh sample set.
"""

import heapq
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.evidence import Evidence, snapshot_evidence
from ..core.trajectory import Trajectory, Transition
from ..exceptions import DegenerateSampleSetError, EstimationError, EvidenceError
from ..inference.diagnostics import DiagnosticsLog
from ..inference.importance import ImportanceSampler, ProposalConfig, normalized_weights, weight_diagnostics
from ..model.coevolution import CoevolutionModel
from ..model.params import ModelDefinition, ModelParams
from ..model.state import NetworkState
from .objective import (
    DEFAULT_GTOL,
    DEFAULT_RATE_FLOOR,
    ExpectedStatistics,
    expected_complete_loglik,
    maximize_weights,
    rate_mle,
    rate_step,
    weight_step,
)
from .result import FitResult

logger = logging.getLogger(__name__)

Snapshot = Tuple[float, NetworkState]


@dataclass
class EMConfig:
    """
    MCEM settings.

    Args:
        samples_per_iter: Importance samples per E-step
        max_outer_iters: Rate/weight loop pairs before giving up
        rate_iters: Rate-only iterations per outer loop
        weight_iters: Weight-only iterations per outer loop
        tolerance: Largest parameter change that counts as converged
        rate_scale: Proposal rate factor
        seed: Root seed of every E-step
        rate_floor: Lower bound on updated rates
        gtol: Gradient tolerance of the weight optimiser
        max_steps: Proposal step limit per sample
        progress: Show progress bars
    """

    samples_per_iter: int = 400
    max_outer_iters: int = 20
    rate_iters: int = 2
    weight_iters: int = 3
    tolerance: float = 1e-2
    rate_scale: float = 0.5
    seed: Optional[int] = None
    rate_floor: float = DEFAULT_RATE_FLOOR
    gtol: float = DEFAULT_GTOL
    max_steps: int = 1_000_000
    progress: bool = False

    def __post_init__(self):
        if self.samples_per_iter < 1:
            raise ValueError("samples_per_iter must be at least 1")
        if self.max_outer_iters < 1 or self.rate_iters < 0 or self.weight_iters < 0:
            raise ValueError("iteration counts must be non-negative (outer loops positive)")
        if self.rate_iters + self.weight_iters == 0:
            raise ValueError("at least one rate or weight iteration is needed")
        if self.tolerance <= 0 or self.gtol <= 0 or self.rate_floor <= 0:
            raise ValueError("tolerances and the rate floor must be positive")
        ProposalConfig(self.rate_scale, self.max_steps)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def snapshots_to_evidence(snapshots: Sequence[Snapshot]) -> Evidence:
    """
    Point evidence from full snapshots, with the first snapshot moved to time 0.
    """
    if len(snapshots) < 2:
        raise EvidenceError("at least two snapshots are needed")
    ordered = sorted(snapshots, key=lambda s: s[0])
    t0 = float(ordered[0][0])
    return snapshot_evidence([(float(t) - t0, s.to_assignment()) for t, s in ordered])


def observed_change_counts(evidence: Evidence) -> Tuple[float, float]:
    """Link flips and attribute steps between consecutive observations of each variable."""
    links = 0.0
    attrs = 0.0
    for v in evidence.variables:
        reqs = evidence.for_variable(v).requirements()
        moved = sum(abs(b - a) for (_, a), (_, b) in zip(reqs, reqs[1:]))
        if v.is_link:
            links += moved
        elif v.is_attribute:
            attrs += moved
    return links, attrs


def initial_params(evidence: Evidence, definition: ModelDefinition, floor: float = DEFAULT_RATE_FLOOR) -> ModelParams:
    """
    Zero weights and shared rates matched to the observed amount of change.

    ``lambda_n = flips / (N T)`` and ``lambda_a = steps / (N T H)`` over the
    movable attributes, both floored.
    """
    n = definition.n_actors
    t = max(evidence.t_end, 1e-12)
    links, attrs = observed_change_counts(evidence)
    movable = len(definition.movable_attributes())
    network_rate = max(links / (n * t), floor)
    attribute_rate = max(attrs / (n * t * movable), floor) if movable else 0.0
    params = ModelParams.initial(definition, network_rate, attribute_rate)
    logger.debug("Initial rates %.4g / %.4g from %d flips and %d steps", network_rate, attribute_rate, links, attrs)
    return params


def clamped_trajectory(evidence: Evidence, variables: Sequence) -> Trajectory:
    """The single trajectory allowed by evidence that clamps every variable throughout."""
    initial = {}
    paths = []
    for v in variables:
        segs = evidence.for_variable(v).clamps[0].segments
        initial[v] = segs[0][1]
        paths.append([Transition(s, v, a, b) for (_, a), (s, b) in zip(segs, segs[1:])])
    return Trajectory(evidence.t_end, initial, list(heapq.merge(*paths, key=lambda tr: tr.time)))


def fit_complete_data(trajectories: Sequence[Trajectory], definition: ModelDefinition,
                      gtol: float = DEFAULT_GTOL) -> FitResult:
    """
    Maximum-likelihood fit to fully observed trajectories.

    Rates are pooled decision counts over pooled clock time; weights maximise
    the conditional-logit sum by conjugate gradients.
    """
    if not trajectories:
        raise EstimationError("no trajectories to fit", {"trajectories": 0})
    model = CoevolutionModel(definition, ModelParams.initial(definition))
    summaries = [model.summarize(t) for t in trajectories]
    stats = ExpectedStatistics.pool(summaries, np.ones(len(summaries)))
    shared = definition.shared_rates
    network = rate_mle(stats.network_counts, stats.network_exposure, shared)
    attribute = (rate_mle(stats.attribute_counts, stats.attribute_exposure, shared)
                 if definition.movable_attributes() else model.params.attribute_rate)
    beta0 = np.zeros(definition.n_network_effects + definition.n_attribute_effects)
    step = maximize_weights(stats, beta0, definition.n_network_effects, gtol)
    k = definition.n_network_effects
    params = ModelParams(network, attribute, step.beta[:k], step.beta[k:])
    value = expected_complete_loglik(params, stats)
    converged = not step.aborted and step.gradient_norm < gtol * (1.0 + abs(step.value)) * np.sqrt(max(beta0.size, 1))
    trace = [{"iteration": 1, "phase": "complete", "expected_loglik": value, "gradient_norm": step.gradient_norm,
              "effective_sample_size": float(len(trajectories))}]
    logger.info("Complete-data fit over %d trajectories: log-likelihood %.6g", len(trajectories), value)
    return FitResult(params, converged, trace,
                     {"gradient_norm": step.gradient_norm, "trajectories": len(trajectories), "flags": []},
                     method="complete")


def mcem_fit(observations: Union[Evidence, Sequence[Snapshot]], definition: ModelDefinition,
             config: Optional[EMConfig] = None, params: Optional[ModelParams] = None,
             diagnostics: Optional[DiagnosticsLog] = None) -> FitResult:
    """
    Fit rates and weights to snapshot (or other partial) evidence.

    Args:
        observations: Evidence, or full snapshots ``(time, state)``
        definition: Model skeleton declaring the effects
        config: EM settings
        params: Starting parameters (moment-matched rates and zero weights by default)
        diagnostics: Sink for per-batch sampler diagnostics

    Returns:
        FitResult: Final parameters, trace and diagnostics

    Raises:
        EstimationError: If an E-step produces no usable sample
    """
    config = config or EMConfig()
    log = diagnostics or DiagnosticsLog()
    evidence = observations if isinstance(observations, Evidence) else snapshots_to_evidence(observations)
    variables = definition.variables()
    if evidence.is_complete_for(variables):
        logger.info("Evidence clamps every variable; fitting the complete data directly")
        return fit_complete_data([clamped_trajectory(evidence, variables)], definition, config.gtol)

    params = (params or initial_params(evidence, definition, config.rate_floor)).check(definition)
    model = CoevolutionModel(definition, params)
    proposal = ProposalConfig(config.rate_scale, config.max_steps)
    root = np.random.SeedSequence(config.seed)
    links, _ = observed_change_counts(evidence)
    flags: List[str] = []
    if links == 0:
        flags.append("low_information: no link change between observations")
    trace: List[Dict[str, Any]] = []
    converged = False
    step_no = 0

    for outer in range(1, config.max_outer_iters + 1):
        start = params.copy()
        for phase, count in (("rate", config.rate_iters), ("weights", config.weight_iters)):
            for _ in range(count):
                step_no += 1
                sampler = ImportanceSampler(model, evidence, config=proposal)
                samples = sampler.sample_many(config.samples_per_iter, root.spawn(1)[0], config.progress)
                batch = weight_diagnostics(samples)
                log.write("e_step", iteration=step_no, outer=outer, phase=phase, **batch)
                try:
                    weights = normalized_weights(samples)
                except DegenerateSampleSetError as exc:
                    failures = sorted({s.failure for s in samples if s.failure})[:5]
                    raise EstimationError(str(exc), {"iteration": step_no, "phase": phase,
                                                     "failures": failures, **batch}) from exc
                keep = np.flatnonzero(weights > 0)
                summaries = [model.summarize(samples[k].trajectory) for k in keep]
                stats = ExpectedStatistics.pool(summaries, weights[keep])
                record = {"iteration": step_no, "outer": outer, "phase": phase,
                          "effective_sample_size": batch["effective_sample_size"]}
                if phase == "rate":
                    params = rate_step(params, stats, definition.shared_rates, config.rate_floor)
                else:
                    params, wstep = weight_step(params, stats, config.gtol)
                    record["gradient_norm"] = wstep.gradient_norm
                    if wstep.aborted:
                        flags.append(f"weight step {step_no} aborted: {wstep.message}")
                record["expected_loglik"] = expected_complete_loglik(params, stats)
                trace.append(record)
                model = model.with_params(params)
                logger.debug("Iteration %d (%s): expected log-likelihood %.6g, ESS %.1f", step_no, phase,
                             record["expected_loglik"], record["effective_sample_size"])
        change = params.distance(start)
        logger.info("MCEM outer loop %d: parameter change %.4g", outer, change)
        if change < config.tolerance:
            converged = True
            break

    if np.all(params.network_rate <= config.rate_floor):
        flags.append("network rate at the lower bound")
    if not converged:
        flags.append(f"no convergence after {config.max_outer_iters} outer loops")
        logger.warning("MCEM stopped without converging")
    return FitResult(params, converged, trace,
                     {"flags": flags, "iterations": step_no, "t_end": evidence.t_end,
                      "effective_sample_size": [r["effective_sample_size"] for r in trace]},
                     method="mcem")
