"""
Method-of-moments estimation from panel snapshots.

Parameters are chosen so that the expected value of a set of target
statistics, obtained by forward simulation from each observed snapshot to
the next, matches the observed value. The root is found by a damped
stochastic Newton iteration whose Jacobian comes from finite differences
under common random numbers.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.distributions import spawn_streams
from ..exceptions import UsageError
from ..model.coevolution import CoevolutionModel
from ..model.effects import effect_value
from ..model.params import ModelDefinition, ModelParams
from ..model.simulation import simulate
from ..model.state import NetworkState
from .mcem import Snapshot, initial_params, snapshots_to_evidence
from .objective import DEFAULT_RATE_FLOOR
from .result import FitResult

logger = logging.getLogger(__name__)

MIN_SNAPSHOTS = 3
# Jacobians worse conditioned than this fall back to a gradient step
MAX_CONDITION = 1e12


@dataclass
class MoMConfig:
    """
    Method-of-moments settings.

    Args:
        simulations: Forward simulations per expected-statistic evaluation
        fd_step: Relative finite-difference step for the Jacobian
        damping: Step factor applied whenever a residual changes sign
        max_iters: Newton iterations before giving up
        tolerance: Largest scaled residual ``|E[D] - d| / max(1, |d|)`` accepted
        seed: Root seed of the simulations
        rate_floor: Lower bound on rates
    """

    simulations: int = 50
    fd_step: float = 0.05
    damping: float = 0.5
    max_iters: int = 30
    tolerance: float = 0.1
    seed: Optional[int] = None
    rate_floor: float = DEFAULT_RATE_FLOOR

    def __post_init__(self):
        for name in ("simulations", "fd_step", "damping", "max_iters", "tolerance", "rate_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.damping >= 1:
            raise ValueError("damping must be below 1")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class MomentProblem:
    """
    Target statistics of one snapshot sequence and the parameter packing.

    The parameter vector is ``[network rate, attribute rate (if any movable
    attribute), network weights, attribute weights]``; rates are shared.
    """

    def __init__(self, definition: ModelDefinition, snapshots: Sequence[Snapshot]):
        if len(snapshots) < MIN_SNAPSHOTS:
            raise UsageError(f"method of moments needs at least {MIN_SNAPSHOTS} snapshots, got {len(snapshots)}")
        self.definition = definition
        self.snapshots = sorted(snapshots, key=lambda s: s[0])
        self.has_attribute_rate = bool(definition.movable_attributes())
        self.n_rates = 1 + int(self.has_attribute_rate)
        self.observed = sum(self.statistics(a, b) for (_, a), (_, b) in zip(self.snapshots, self.snapshots[1:]))

    @property
    def labels(self) -> List[str]:
        rates = ["network rate"] + (["attribute rate"] if self.has_attribute_rate else [])
        return rates + self.definition.network_labels() + self.definition.attribute_labels()

    def statistics(self, previous: NetworkState, current: NetworkState) -> np.ndarray:
        """
        Target statistics of one observation interval.

        Rates: summed absolute link and attribute changes. Network weights:
        effects evaluated on the new network with the old attributes.
        Attribute weights: effects evaluated on the old network with the new
        attributes.
        """
        d = self.definition
        n = d.n_actors
        movable = d.movable_attributes()
        out = [float(np.abs(previous.y.astype(int) - current.y).sum())]
        if self.has_attribute_rate:
            out.append(float(np.abs(previous.z[movable] - current.z[movable]).sum()))
        network_view = NetworkState(current.y, previous.z, d.attributes, validate=False)
        attribute_view = NetworkState(previous.y, current.z, d.attributes, validate=False)
        out.extend(sum(effect_value(s, i, network_view) for i in range(n)) for s in d.network_effects)
        out.extend(sum(effect_value(s, i, attribute_view) for i in range(n)) for s in d.attribute_effects)
        return np.array(out, dtype=float)

    def pack(self, params: ModelParams) -> np.ndarray:
        rates = [params.network_rate.mean()] + ([params.attribute_rate.mean()] if self.has_attribute_rate else [])
        return np.concatenate([rates, params.network_weights, params.attribute_weights])

    def unpack(self, theta: np.ndarray) -> ModelParams:
        d = self.definition
        k = d.n_network_effects
        r = self.n_rates
        attribute_rate = theta[1] if self.has_attribute_rate else 0.0
        return ModelParams.shared(d.n_actors, theta[0], attribute_rate, theta[r:r + k], theta[r + k:])

    def expected(self, theta: np.ndarray, simulations: int, seed: int) -> np.ndarray:
        """
        Mean statistics over ``simulations`` forward runs from each snapshot.

        The same ``seed`` always yields the same random streams, so two
        parameter values evaluated with one seed share their randomness.
        """
        model = CoevolutionModel(self.definition, self.unpack(theta))
        d = self.definition
        intervals = list(zip(self.snapshots, self.snapshots[1:]))
        streams = spawn_streams(seed, simulations * len(intervals))
        total = np.zeros_like(self.observed)
        k = 0
        for _ in range(simulations):
            for (t0, start), (t1, _) in intervals:
                sim = simulate(model, start, t1 - t0, streams[k])
                k += 1
                end = NetworkState.from_assignment(sim.trajectory.final_state(), d.n_actors, d.attributes)
                total += self.statistics(start, end)
        return total / simulations


def _scaled_residual(residual: np.ndarray, observed: np.ndarray) -> float:
    return float(np.max(np.abs(residual) / np.maximum(1.0, np.abs(observed))))


def mom_fit(snapshots: Sequence[Snapshot], definition: ModelDefinition, config: Optional[MoMConfig] = None,
            params: Optional[ModelParams] = None) -> FitResult:
    """
    Solve ``E[D] = d_observed`` by damped stochastic Newton iteration.

    Args:
        snapshots: At least three full snapshots ``(time, state)``
        definition: Model skeleton
        config: Iteration settings
        params: Starting point (moment-matched rates and zero weights by default)

    Returns:
        FitResult: Best iterate seen; ``converged`` is False when the
        tolerance was never reached

    Raises:
        UsageError: With fewer than three snapshots
    """
    config = config or MoMConfig()
    problem = MomentProblem(definition, snapshots)
    start = params or initial_params(snapshots_to_evidence(snapshots), definition, config.rate_floor)
    theta = problem.pack(start.check(definition))
    seeds = np.random.default_rng(config.seed)
    observed = problem.observed
    flags: List[str] = []
    trace: List[Dict[str, Any]] = []
    gain = 1.0
    previous_residual = None
    best: Tuple[float, np.ndarray] = (np.inf, theta.copy())
    converged = False

    for iteration in range(1, config.max_iters + 1):
        seed = int(seeds.integers(2 ** 63))
        expected = problem.expected(theta, config.simulations, seed)
        residual = observed - expected
        score = _scaled_residual(residual, observed)
        if score < best[0]:
            best = (score, theta.copy())
        trace.append({"iteration": iteration, "max_scaled_residual": score, "gain": gain,
                      **{f"theta_{k}": float(v) for k, v in enumerate(theta)}})
        logger.info("MoM iteration %d: max scaled residual %.4g", iteration, score)
        if score < config.tolerance:
            converged = True
            break
        if previous_residual is not None and np.any(np.sign(residual) * np.sign(previous_residual) < 0):
            gain *= config.damping
        previous_residual = residual

        jacobian = np.zeros((len(theta), len(theta)))
        for p in range(len(theta)):
            h = config.fd_step * max(1.0, abs(theta[p]))
            shifted = theta.copy()
            shifted[p] += h
            jacobian[:, p] = (problem.expected(shifted, config.simulations, seed) - expected) / h
        try:
            if np.linalg.cond(jacobian) > MAX_CONDITION:
                raise np.linalg.LinAlgError("ill-conditioned Jacobian")
            step = np.linalg.solve(jacobian, residual)
        except np.linalg.LinAlgError:
            logger.debug("Singular Jacobian at iteration %d; taking a gradient step", iteration)
            scale = float(np.sum(jacobian ** 2)) or 1.0
            step = jacobian.T @ residual / scale
            trace[-1]["fallback"] = True
        theta = theta + gain * step
        theta[:problem.n_rates] = np.maximum(theta[:problem.n_rates], config.rate_floor)

    score, theta = best
    fitted = problem.unpack(theta)
    if observed[0] == 0:
        flags.append("low_information: no link change between snapshots")
    if np.any(theta[:problem.n_rates] <= config.rate_floor):
        flags.append("rate at the lower bound")
    if not converged:
        flags.append(f"no convergence after {config.max_iters} iterations")
        logger.warning("Method of moments stopped without converging (best scaled residual %.4g)", score)
    return FitResult(fitted, converged, trace,
                     {"flags": flags, "observed_statistics": dict(zip(problem.labels, observed.tolist())),
                      "best_scaled_residual": score}, method="mom")
