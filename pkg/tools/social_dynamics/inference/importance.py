"""
Evidence-constrained importance sampling of trajectories.

Each step every unclamped variable draws a candidate transition time:

- free variables (no upcoming evidence, or already agreeing with it) use an
  exponential clock at the scaled rate ``kappa * q``;
- variables that disagree with their next required value draw from an
  exponential truncated to the time left before that requirement, so the
  sample is forced to conform;
- variables inside an evidence window follow the evidence and contribute
  their likelihood to the weight.

The earliest candidate fires unless an evidence boundary comes first. The
log-weight accumulates the exact target / proposal density ratio.
"""

import bisect
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax
from tqdm import tqdm

from ..core.distributions import exponential_quantile, log1mexp, spawn_streams, truncated_exponential_quantile
from ..core.evidence import Evidence
from ..core.trajectory import Trajectory, TrajectoryBuilder
from ..exceptions import DegenerateSampleSetError, EvidenceError
from ..model.coevolution import CoevolutionModel
from ..model.simulation import RateCache
from ..model.state import NetworkState

logger = logging.getLogger(__name__)

DEFAULT_RATE_SCALE = 0.5
DEFAULT_MAX_STEPS = 1_000_000


@dataclass(frozen=True)
class ProposalConfig:
    """
    Proposal settings.

    Args:
        rate_scale: Factor applied to every proposal rate, in (0, 1]
        max_steps: Give up on a sample after this many steps
    """

    rate_scale: float = DEFAULT_RATE_SCALE
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if not 0.0 < self.rate_scale <= 1.0:
            raise ValueError(f"rate_scale must lie in (0, 1], got {self.rate_scale}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class WeightedTrajectory:
    trajectory: Optional[Trajectory]
    log_weight: float
    failure: Optional[str] = None

    @property
    def is_failure(self) -> bool:
        return self.failure is not None or not self.log_weight > -math.inf


@dataclass
class _Boundary:
    clamp_starts: List[int]
    clamp_ends: List[int]
    changes: List[tuple]
    checks: List[tuple]


class ImportanceSampler:
    """
    Proposal distribution for one model and one body of evidence.

    Args:
        model: Target model
        evidence: Evidence the samples must conform to
        t_end: End of the sampled window (defaults to the evidence window)
        config: Proposal settings
    """

    def __init__(self, model: CoevolutionModel, evidence: Evidence, t_end: Optional[float] = None,
                 config: Optional[ProposalConfig] = None):
        self.model = model
        self.evidence = evidence
        self.t_end = float(evidence.t_end if t_end is None else t_end)
        if self.t_end < evidence.t_end:
            raise EvidenceError(f"window end {self.t_end} precedes evidence end {evidence.t_end}")
        self.config = config or ProposalConfig()
        self.variables = model.definition.variables()
        self._position = {v: k for k, v in enumerate(self.variables)}
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self._prepare()

    def _prepare(self) -> None:
        n_vars = len(self.variables)
        self._req_times: List[List[float]] = [[] for _ in range(n_vars)]
        self._req_values: List[List[int]] = [[] for _ in range(n_vars)]
        self._initial: Dict[int, int] = {}
        boundaries: Dict[float, _Boundary] = {}

        def at(t):
            return boundaries.setdefault(t, _Boundary([], [], [], []))

        for v in self.evidence.variables:
            if v not in self._position:
                raise EvidenceError(f"evidence refers to {v}, which is not a model variable")
            k = self._position[v]
            ev = self.evidence.for_variable(v)
            for t, x in ev.requirements():
                self._req_times[k].append(t)
                self._req_values[k].append(x)
                if t == 0.0:
                    self._initial[k] = x
                else:
                    at(t).checks.append((k, x))
            for clamp in ev.clamps:
                if clamp.start > 0.0:
                    at(clamp.start).clamp_starts.append(k)
                at(clamp.end).clamp_ends.append(k)
                for s, x in clamp.segments[1:]:
                    at(s).changes.append((k, x))
        for t, b in boundaries.items():
            if len(b.changes) > 1:
                raise EvidenceError(f"several evidence-driven transitions at time {t}")
        self._clamps = {self._position[v]: list(self.evidence.for_variable(v).clamps) for v in self.evidence.variables}
        at(self.t_end)
        self._boundary_times = sorted(t for t in boundaries if 0.0 < t <= self.t_end)
        self._boundaries = boundaries

    def _initial_state(self, rng: np.random.Generator) -> NetworkState:
        d = self.model.definition
        state = NetworkState.empty(d.n_actors, d.attributes)
        for k, v in enumerate(self.variables):
            if k in self._initial:
                value = self._initial[k]
            elif v.is_link:
                value = int(rng.random() < d.link_prior)
            else:
                spec = d.attributes[v.first]
                value = int(rng.integers(spec.z_min, spec.z_max + 1))
            state.set(v, value)
        state._validate()
        return state

    def sample(self, rng: np.random.Generator) -> WeightedTrajectory:
        """
        Draw one weighted trajectory.

        Returns:
            WeightedTrajectory: Sample and log-weight; failures carry a reason
                and weight -inf
        """
        kappa = self.config.rate_scale
        n_vars = len(self.variables)
        cache = RateCache(self.model, self._initial_state(rng))
        builder = TrajectoryBuilder(cache.state.to_assignment())
        clamped = np.zeros(n_vars, dtype=bool)
        for k, clamps in self._clamps.items():
            clamped[k] = any(c.start == 0.0 for c in clamps)
        log_w = 0.0
        t = 0.0
        b_idx = 0
        values = np.array([cache.state.get(v) for v in self.variables])
        next_time = np.full(n_vars, np.inf)
        next_value = np.zeros(n_vars, dtype=int)
        for k in range(n_vars):
            self._next_requirement(k, 0.0, next_time, next_value)
        for _ in range(self.config.max_steps):
            boundary = self._boundary_times[b_idx]
            q = cache.exit_rates()
            q_prop = kappa * q
            forced = ~clamped & np.isfinite(next_time) & (values != next_value)
            free = ~clamped & ~forced
            horizon = np.where(forced, next_time - t, np.inf)
            stuck = forced & (q_prop <= 0)
            if stuck.any():
                v = self.variables[int(np.argmax(stuck))]
                return WeightedTrajectory(None, -math.inf, f"{v} cannot reach its evidence value before {next_time[stuck][0]}")

            u = rng.random(n_vars)
            candidate = np.full(n_vars, np.inf)
            candidate[free] = exponential_quantile(q_prop[free], u[free])
            candidate[forced] = truncated_exponential_quantile(q_prop[forced], horizon[forced], u[forced])
            winner = int(np.argmin(candidate))
            fires = t + candidate[winner] < boundary
            delta = candidate[winner] if fires else boundary - t
            if fires and not t + delta > t:
                return WeightedTrajectory(None, -math.inf, f"time resolution exhausted at {t}")

            log_w -= float(np.sum((q[~clamped] - q_prop[~clamped]) * delta))
            log_w -= float(np.sum(q[clamped]) * delta)
            if forced.any():
                log_w += float(np.sum(log1mexp(q_prop[forced] * horizon[forced])))
                survivors = forced.copy()
                if fires:
                    survivors[winner] = False
                if survivors.any():
                    remaining = horizon[survivors] - delta
                    if np.any(remaining <= 0):
                        return WeightedTrajectory(None, -math.inf, f"time resolution exhausted at {t}")
                    log_w -= float(np.sum(log1mexp(q_prop[survivors] * remaining)))

            if fires:
                t = t + delta
                log_w -= math.log(kappa)
                variable = self.variables[winner]
                moves = cache.moves(variable)
                cumulative = np.cumsum([r for _, r in moves])
                pick = min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")),
                           len(moves) - 1)
                new_value = moves[pick][0]
                builder.add(t, variable, new_value)
                cache.apply(variable, new_value)
                values[winner] = new_value
                continue

            t = boundary
            failure = self._cross_boundary(t, cache, builder, values, clamped)
            if isinstance(failure, str):
                return WeightedTrajectory(None, -math.inf, failure)
            log_w += failure
            for k, _ in self._boundaries[t].checks:
                self._next_requirement(k, t, next_time, next_value)
            if t >= self.t_end:
                return WeightedTrajectory(builder.build(self.t_end, validate=False), float(log_w))
            b_idx += 1
        return WeightedTrajectory(None, -math.inf, f"gave up after {self.config.max_steps} steps")

    def _next_requirement(self, k: int, t: float, next_time: np.ndarray, next_value: np.ndarray) -> None:
        times = self._req_times[k]
        pos = bisect.bisect_right(times, t)
        if pos < len(times):
            next_time[k] = times[pos]
            next_value[k] = self._req_values[k][pos]
        else:
            next_time[k] = np.inf

    def _cross_boundary(self, t: float, cache: RateCache, builder: TrajectoryBuilder,
                        values: np.ndarray, clamped: np.ndarray):
        """Apply evidence at a boundary; returns the log-weight term or a failure reason."""
        b = self._boundaries[t]
        term = 0.0
        for k, x in b.changes:
            variable = self.variables[k]
            rate = cache.rate(variable, x)
            if rate <= 0:
                return f"evidence moves {variable} to {x} at {t}, which has zero rate"
            term += math.log(rate)
            if t < self.t_end:
                builder.add(t, variable, x)
                cache.apply(variable, x)
                values[k] = x
        for k in b.clamp_ends:
            clamped[k] = False
        for k in b.clamp_starts:
            clamped[k] = True
        for k, x in b.checks:
            if values[k] != x:
                return f"{self.variables[k]} is {values[k]} at {t}, evidence requires {x}"
        return term

    def sample_many(self, count: int, seed, progress: bool = False) -> List[WeightedTrajectory]:
        """
        Draw ``count`` samples, sample k always from stream k of ``seed``.
        """
        streams = spawn_streams(seed, count)
        iterator = tqdm(streams, desc="Sampling trajectories", disable=not progress)
        samples = [self.sample(rng) for rng in iterator]
        failures = sum(s.is_failure for s in samples)
        if failures:
            self.logger.debug("%d of %d proposals failed", failures, count)
        return samples


def propose_trajectory(model: CoevolutionModel, evidence: Evidence, t_end: float,
                       config: ProposalConfig, rng: np.random.Generator) -> WeightedTrajectory:
    """Draw one trajectory conforming to ``evidence`` and its importance weight."""
    return ImportanceSampler(model, evidence, t_end, config).sample(rng)


def log_weights(samples: Sequence[WeightedTrajectory]) -> np.ndarray:
    return np.array([s.log_weight if s.failure is None else -np.inf for s in samples], dtype=float)


def normalized_weights(samples: Sequence[WeightedTrajectory]) -> np.ndarray:
    """
    Self-normalised weights.

    Raises:
        DegenerateSampleSetError: If no sample has a finite log-weight
    """
    lw = log_weights(samples)
    if len(lw) == 0 or not np.isfinite(lw).any():
        raise DegenerateSampleSetError(f"all {len(lw)} samples have zero weight")
    return softmax(lw)


def estimate_expectation(f: Callable[[Trajectory], object], samples: Sequence[WeightedTrajectory]) -> np.ndarray:
    """
    Weighted average ``sum f(s) w(s) / sum w(s)``.

    Args:
        f: Function of a trajectory returning a scalar or an array
        samples: Weighted trajectories

    Returns:
        np.ndarray: Estimate with the shape of ``f``'s output
    """
    w = normalized_weights(samples)
    keep = np.flatnonzero(w > 0)
    values = np.array([np.asarray(f(samples[k].trajectory), dtype=float) for k in keep])
    return np.tensordot(w[keep], values, axes=1)


def effective_sample_size(samples: Sequence[WeightedTrajectory]) -> float:
    """``(sum w)^2 / sum w^2``, between 1 and the number of samples."""
    w = normalized_weights(samples)
    return float(1.0 / np.sum(w ** 2))


def weight_diagnostics(samples: Sequence[WeightedTrajectory]) -> Dict[str, float]:
    """Summary of a batch: counts, log-weight moments and effective sample size."""
    lw = log_weights(samples)
    finite = lw[np.isfinite(lw)]
    record = {
        "sample_count": int(len(lw)),
        "finite_count": int(finite.size),
        "failures": int(len(lw) - finite.size),
        "log_weight_mean": float(finite.mean()) if finite.size else None,
        "log_weight_var": float(finite.var()) if finite.size else None,
        "log_normalizer": float(logsumexp(finite) - math.log(len(lw))) if finite.size else None,
        "effective_sample_size": float(1.0 / np.sum(softmax(finite) ** 2)) if finite.size else 0.0,
    }
    return record
