"""
Hidden network dynamics observed only through communication events.

Every ordered pair (i, j) carries a toggle variable ``O_ij`` whose flips are
the events sent from i to j. Its rate depends on the hidden link pair
``(Y_ij, Y_ji)`` through a shared 2 x 2 table. The links themselves are
never observed; their posterior is explored with a Metropolis-Hastings chain
that resamples the whole path of one link at a time.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..core.distributions import exponential_quantile
from ..core.intensity import IntensityMatrix
from ..core.oracle import build_joint_generator, joint_states, smoothed_state_marginals
from ..core.statistics import LogDensity
from ..core.trajectory import Trajectory, Transition
from ..core.variables import VariableId
from ..exceptions import EvidenceError, InvalidModelError
from ..model.coevolution import CoevolutionModel
from ..model.simulation import simulate
from ..model.state import NetworkState

logger = logging.getLogger(__name__)

DEFAULT_BURN_IN = 10000
DEFAULT_THIN = 1000

Segments = Sequence[Tuple[float, int]]


@dataclass
class ObservationParams:
    """
    Event rates ``q[k, l]`` of a directed pair whose forward link is in state
    k and backward link in state l. Shared by every pair.
    """

    rates: np.ndarray

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise InvalidModelError("observation rates must be finite and non-negative")
        if not np.any(rates > 0):
            raise InvalidModelError("at least one observation rate must be positive")
        self.rates = rates

    def rate(self, k: int, l: int) -> float:
        return float(self.rates[k, l])

    def cim(self, k: int, l: int) -> IntensityMatrix:
        """Toggle intensity matrix of ``O_ij`` in context (k, l): equal flip rates both ways."""
        q = self.rate(k, l)
        return IntensityMatrix.two_state(q, q)

    def as_dict(self) -> Dict[str, float]:
        return {f"{k},{l}": float(self.rates[k, l]) for k in (0, 1) for l in (0, 1)}

    @classmethod
    def from_dict(cls, values: Mapping[str, float]) -> "ObservationParams":
        rates = np.zeros((2, 2))
        for key, value in values.items():
            digits = [c for c in str(key) if c.isdigit()]
            if len(digits) != 2 or not set(digits) <= {"0", "1"}:
                raise ValueError(f"observation rate key '{key}' must name a context such as '0,1' or 'q01'")
            k, l = int(digits[0]), int(digits[1])
            rates[k, l] = float(value)
        return cls(rates)


class EventStream:
    """
    Time-ordered directed events ``(time, sender, recipient)`` on ``[0, t_end)``.

    Args:
        events: Event triples
        n_actors: Number of actors
        t_end: End of the observation window
        actor_names: Optional roster
        time_unit: Unit label of the times
    """

    def __init__(self, events: Iterable[Tuple[float, int, int]], n_actors: int, t_end: float,
                 actor_names: Optional[Sequence[str]] = None, time_unit: str = "day"):
        rows = sorted((float(t), int(i), int(j)) for t, i, j in events)
        self.n_actors = int(n_actors)
        self.t_end = float(t_end)
        self.actor_names = tuple(actor_names) if actor_names is not None else None
        self.time_unit = time_unit
        self.times = np.array([r[0] for r in rows], dtype=float)
        self.senders = np.array([r[1] for r in rows], dtype=int)
        self.recipients = np.array([r[2] for r in rows], dtype=int)
        self._validate()
        self._by_pair: Dict[Tuple[int, int], np.ndarray] = {}
        for (i, j) in set(zip(self.senders.tolist(), self.recipients.tolist())):
            self._by_pair[(i, j)] = self.times[(self.senders == i) & (self.recipients == j)]

    def _validate(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise EvidenceError("event times must be strictly increasing")
        if len(self.times) and (self.times[0] < 0 or self.times[-1] >= self.t_end):
            raise EvidenceError(f"events must fall inside [0, {self.t_end})")
        if np.any(self.senders == self.recipients):
            raise EvidenceError("events from an actor to itself are not allowed")
        if len(self.times) and (min(self.senders.min(), self.recipients.min()) < 0
                                or max(self.senders.max(), self.recipients.max()) >= self.n_actors):
            raise EvidenceError(f"event actor index outside [0, {self.n_actors})")
        if self.actor_names is not None and len(self.actor_names) != self.n_actors:
            raise EvidenceError("actor roster does not match the actor count")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times.tolist(), self.senders.tolist(), self.recipients.tolist()))

    def for_pair(self, i: int, j: int) -> np.ndarray:
        return self._by_pair.get((i, j), np.zeros(0))

    def pairs(self) -> List[Tuple[int, int]]:
        return sorted(self._by_pair)

    def count_matrix(self) -> np.ndarray:
        counts = np.zeros((self.n_actors, self.n_actors), dtype=int)
        np.add.at(counts, (self.senders, self.recipients), 1)
        return counts


def _values_at(segments: Segments, times: np.ndarray) -> np.ndarray:
    starts = np.array([s for s, _ in segments])
    values = np.array([x for _, x in segments])
    return values[np.searchsorted(starts, times, side="right") - 1]


def context_durations(path_ij: Segments, path_ji: Segments, t_end: float, t_start: float = 0.0) -> np.ndarray:
    """Time spent in each link-pair context (k, l) over ``[t_start, t_end)``."""
    cuts = sorted({t_start, t_end} | {s for s, _ in path_ij if t_start < s < t_end}
                  | {s for s, _ in path_ji if t_start < s < t_end})
    cuts = np.array(cuts)
    durations = np.zeros((2, 2))
    if len(cuts) < 2:
        return durations
    k = _values_at(path_ij, cuts[:-1])
    l = _values_at(path_ji, cuts[:-1])
    np.add.at(durations, (k, l), np.diff(cuts))
    return durations


def context_counts(event_times: np.ndarray, path_ij: Segments, path_ji: Segments) -> np.ndarray:
    counts = np.zeros((2, 2))
    if len(event_times):
        np.add.at(counts, (_values_at(path_ij, event_times), _values_at(path_ji, event_times)), 1)
    return counts


def event_log_likelihood(event_times: np.ndarray, path_ij: Segments, path_ji: Segments,
                         obs: ObservationParams, t_end: float, t_start: float = 0.0) -> LogDensity:
    """
    Log-density of the events of one directed pair given the link paths.

    ``sum_events ln q[k(t), l(t)] - integral q[k(t), l(t)] dt`` over
    ``[t_start, t_end)``, where ``(k, l)`` are the values of ``(Y_ij, Y_ji)``.

    Args:
        event_times: Event times of the pair
        path_ij: Segment list of ``Y_ij``
        path_ji: Segment list of ``Y_ji``
        obs: Observation rates
        t_end: End of the window
        t_start: Start of the window

    Returns:
        LogDensity: Value, or -inf with the offending events flagged
    """
    times = np.asarray(event_times, dtype=float)
    times = times[(times >= t_start) & (times < t_end)]
    durations = context_durations(path_ij, path_ji, t_end, t_start)
    value = -float(np.sum(obs.rates * durations))
    if len(times):
        k = _values_at(path_ij, times)
        l = _values_at(path_ji, times)
        rates = obs.rates[k, l]
        if np.any(rates <= 0):
            bad = tuple(("event", float(t), int(a), int(b)) for t, a, b, r in zip(times, k, l, rates) if r <= 0)
            return LogDensity(-math.inf, bad)
        value += float(np.sum(np.log(rates)))
    return LogDensity(value)


def observation_statistics(trajectory: Trajectory, events: EventStream) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pooled event counts and context durations over every ordered pair.

    Returns:
        tuple: ``(counts, durations)``, both 2 x 2 indexed by (k, l)
    """
    n = events.n_actors
    counts = np.zeros((2, 2))
    durations = np.zeros((2, 2))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            fwd = trajectory.segments(VariableId.link(i, j))
            bwd = trajectory.segments(VariableId.link(j, i))
            counts += context_counts(events.for_pair(i, j), fwd, bwd)
            durations += context_durations(fwd, bwd, trajectory.t_end)
    return counts, durations


def initial_consistent_trajectory(events: EventStream, t_end: Optional[float] = None,
                                  rng: Optional[np.random.Generator] = None) -> Trajectory:
    """
    A constant link trajectory to start the chain from.

    ``Y_ij`` is 1 throughout when at least one event was sent in either
    direction between i and j, and 0 otherwise. The construction is
    deterministic; ``rng`` is accepted for call compatibility and never read.
    """
    n = events.n_actors
    counts = events.count_matrix()
    talk = (counts + counts.T) > 0
    initial = {VariableId.link(i, j): int(talk[i, j]) for i in range(n) for j in range(n) if i != j}
    return Trajectory(events.t_end if t_end is None else t_end, initial)


def link_marginals(trajectory: Trajectory, grid: Sequence[float], n_actors: int) -> np.ndarray:
    out = np.zeros((len(grid), n_actors, n_actors))
    times = np.asarray(grid, dtype=float)
    for i in range(n_actors):
        for j in range(n_actors):
            if i != j:
                out[:, i, j] = _values_at(trajectory.segments(VariableId.link(i, j)), times)
    return out


def posterior_link_marginals(samples: Sequence[Trajectory], grid: Sequence[float],
                             n_actors: Optional[int] = None) -> np.ndarray:
    """
    Empirical ``P(Y_ij(t) = 1)`` over the samples.

    Returns:
        np.ndarray: ``len(grid) x N x N`` with a zero diagonal
    """
    if not samples:
        raise ValueError("posterior marginals need at least one sample")
    if n_actors is None:
        n_actors = 1 + max(max(v.first, v.second) for v in samples[0].variables)
    total = np.zeros((len(grid), n_actors, n_actors))
    for traj in samples:
        total += link_marginals(traj, grid, n_actors)
    return total / len(samples)


@dataclass
class MHState:
    """
    Current link trajectory of the chain with cached likelihood terms.

    Attributes:
        trajectory: Paths of every link over the window
        actor_terms: Per-actor sum of ``ln lambda + ln P(choice)`` over its decisions
        pair_terms: Event log-likelihood per directed pair
        iteration: Steps taken so far
        accepted: Accepted proposals so far
    """

    trajectory: Trajectory
    actor_terms: np.ndarray
    pair_terms: Dict[Tuple[int, int], float]
    iteration: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.iteration if self.iteration else 0.0


@dataclass
class MHRun:
    samples: List[Trajectory]
    final: MHState
    acceptance_rate: float
    steps: int
    diagnostics: Dict[str, float] = field(default_factory=dict)


class HiddenNetworkSampler:
    """
    Metropolis-Hastings over hidden link trajectories.

    A step picks a directed pair uniformly, proposes a new path for that link
    by forward sampling under its piecewise-constant conditional intensity
    (the other links held fixed) and accepts with the usual ratio of target
    to proposal densities.

    Args:
        model: Link-only co-evolution model
        obs: Observation rates
        events: Observed event stream
        rate_scale: Factor applied to the proposal rates, in (0, 1]
    """

    def __init__(self, model: CoevolutionModel, obs: ObservationParams, events: EventStream,
                 rate_scale: float = 1.0):
        if model.definition.n_attributes:
            raise InvalidModelError("the hidden network model has no attributes")
        if events.n_actors != model.n_actors:
            raise InvalidModelError("event stream and model disagree on the number of actors")
        if not 0.0 < rate_scale <= 1.0:
            raise ValueError(f"rate_scale must lie in (0, 1], got {rate_scale}")
        self.model = model
        self.obs = obs
        self.events = events
        self.rate_scale = rate_scale
        self.t_end = events.t_end
        n = model.n_actors
        self.pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        full = NetworkState(1 - np.eye(n, dtype=np.int8))
        self._affected = {}
        self._inputs = {}
        for i, j in self.pairs:
            v = VariableId.link(i, j)
            self._affected[(i, j)] = sorted({a for _, a in model.affected_decisions(v, full)})
            self._inputs[(i, j)] = model.dependency_set(v, full)
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")

    # -- cached terms ---------------------------------------------------------

    def actor_terms(self, trajectory: Trajectory, actors: Optional[Iterable[int]] = None) -> np.ndarray:
        """Per-actor ``sum ln lambda_a + ln P_a(choice)`` over the actor's decisions."""
        n = self.model.n_actors
        wanted = set(range(n)) if actors is None else set(actors)
        terms = np.zeros(n)
        state = self.model.state_from(trajectory.initial)
        for tr in trajectory.transitions:
            i, j = tr.variable.first, tr.variable.second
            if i in wanted:
                lam = self.model.network_clock_rate(i)
                p = self.model.network_choice_probs(i, state)[j]
                terms[i] += math.log(lam) + math.log(p) if lam > 0 and p > 0 else -math.inf
            state.y[i, j] = tr.new_state
        return terms

    def pair_term(self, trajectory: Trajectory, i: int, j: int) -> float:
        return event_log_likelihood(self.events.for_pair(i, j), trajectory.segments(VariableId.link(i, j)),
                                    trajectory.segments(VariableId.link(j, i)), self.obs, self.t_end).value

    def initial_state(self, trajectory: Trajectory) -> MHState:
        if trajectory.t_end != self.t_end:
            raise EvidenceError("chain trajectory must span the event window")
        pair_terms = {(i, j): self.pair_term(trajectory, i, j) for i, j in self.pairs}
        return MHState(trajectory, self.actor_terms(trajectory), pair_terms)

    def link_prior(self, value: int) -> float:
        return self.model.link_log_prior(value)

    # -- proposal -------------------------------------------------------------

    def _conditional_path(self, trajectory: Trajectory, i: int, j: int,
                          rng: Optional[np.random.Generator] = None) -> Tuple[int, List[Transition], float]:
        """
        Sample (rng given) or score (rng None) the path of ``Y_ij`` given the
        other links.

        Returns:
            tuple: ``(initial_value, transitions, log proposal density)``
        """
        v = VariableId.link(i, j)
        kappa = self.rate_scale
        inputs = self._inputs[(i, j)]
        lam = self.model.network_clock_rate(i)
        state = self.model.state_from(trajectory.initial)
        if rng is None:
            own = trajectory.transitions_of(v)
            value = trajectory.initial[v]
        else:
            own = []
            value = int(rng.random() < self.model.definition.link_prior)
        start = value
        log_q = self.link_prior(value)
        others = [tr for tr in trajectory.transitions if tr.variable != v]
        bounds = [tr.time for tr in others] + [self.t_end]
        own_iter = iter(own)
        pending = next(own_iter, None)
        new_path: List[Transition] = []
        rates = None
        t = 0.0
        for k, end in enumerate(bounds):
            if rates is None:
                rates = []
                for x in (0, 1):
                    state.y[i, j] = x
                    rates.append(kappa * lam * self.model.network_choice_probs(i, state)[j])
            while True:
                q = rates[value]
                if rng is None:
                    fire = pending.time if pending is not None and pending.time < end else None
                else:
                    dt = exponential_quantile(q, rng.random())
                    fire = t + dt if t + dt < end else None
                if fire is None:
                    log_q -= q * (end - t)
                    t = end
                    break
                log_q += math.log(q) - q * (fire - t) if q > 0 else -math.inf
                new_path.append(Transition(fire, v, value, 1 - value))
                value = 1 - value
                t = fire
                if rng is None:
                    pending = next(own_iter, None)
            if k < len(others):
                tr = others[k]
                state.y[tr.variable.first, tr.variable.second] = tr.new_state
                if tr.variable in inputs:
                    rates = None
        return start, new_path, log_q

    def propose(self, trajectory: Trajectory, i: int, j: int, rng: np.random.Generator) -> Tuple[Trajectory, float]:
        start, path, log_q = self._conditional_path(trajectory, i, j, rng)
        return trajectory.with_variable_path(VariableId.link(i, j), start, path), log_q

    def proposal_log_density(self, trajectory: Trajectory, i: int, j: int) -> float:
        return self._conditional_path(trajectory, i, j)[2]

    # -- acceptance -----------------------------------------------------------

    def partial_log_target(self, trajectory: Trajectory, i: int, j: int) -> float:
        """Every factor of the joint density that reads ``Y_ij``."""
        affected = self._affected[(i, j)]
        terms = self.actor_terms(trajectory, affected)
        return (float(terms[affected].sum()) + self.link_prior(trajectory.initial[VariableId.link(i, j)])
                + self.pair_term(trajectory, i, j) + self.pair_term(trajectory, j, i))

    def log_acceptance_ratio(self, current: Trajectory, proposed: Trajectory, i: int, j: int) -> float:
        """``ln r`` for replacing the path of ``Y_ij`` in ``current`` by the one in ``proposed``."""
        forward = self.partial_log_target(proposed, i, j) - self.proposal_log_density(proposed, i, j)
        backward = self.partial_log_target(current, i, j) - self.proposal_log_density(current, i, j)
        return _difference(forward, backward)

    def step(self, state: MHState, rng: np.random.Generator) -> MHState:
        """One Metropolis-Hastings update; returns the (possibly unchanged) state."""
        i, j = self.pairs[int(rng.integers(len(self.pairs)))]
        affected = self._affected[(i, j)]
        current = state.trajectory
        try:
            proposed, log_q_new = self.propose(current, i, j, rng)
        except EvidenceError:
            # proposed transition tied with an existing one
            state.iteration += 1
            return state
        new_terms = self.actor_terms(proposed, affected)
        new_fwd = self.pair_term(proposed, i, j)
        new_bwd = self.pair_term(proposed, j, i)
        v = VariableId.link(i, j)
        target_new = (float(new_terms[affected].sum()) + self.link_prior(proposed.initial[v]) + new_fwd + new_bwd)
        target_old = (float(state.actor_terms[affected].sum()) + self.link_prior(current.initial[v])
                      + state.pair_terms[(i, j)] + state.pair_terms[(j, i)])
        log_q_old = self.proposal_log_density(current, i, j)
        log_r = _difference(target_new - log_q_new, target_old - log_q_old)
        state.iteration += 1
        if math.log(rng.random() + 1e-300) < log_r:
            state.trajectory = proposed
            state.actor_terms = state.actor_terms.copy()
            state.actor_terms[affected] = new_terms[affected]
            state.pair_terms[(i, j)] = new_fwd
            state.pair_terms[(j, i)] = new_bwd
            state.accepted += 1
        return state

    def run(self, initial: Trajectory, n_burn: int, n_samples: int, thin: int,
            rng: np.random.Generator, progress: bool = False) -> MHRun:
        """
        Burn in, then keep every ``thin``-th state until ``n_samples`` are collected.
        """
        if n_burn < 0 or thin < 1 or n_samples < 0:
            raise ValueError("need n_burn >= 0, thin >= 1 and n_samples >= 0")
        state = initial if isinstance(initial, MHState) else self.initial_state(initial)
        start_iter, start_acc = state.iteration, state.accepted
        total = n_burn + n_samples * thin
        samples: List[Trajectory] = []
        for k in tqdm(range(total), desc="MH steps", disable=not progress):
            state = self.step(state, rng)
            if k >= n_burn and (k - n_burn + 1) % thin == 0:
                samples.append(state.trajectory)
        steps = state.iteration - start_iter
        rate = (state.accepted - start_acc) / steps if steps else 0.0
        self.logger.info("MH run: %d steps, %d samples, acceptance rate %.3f", steps, len(samples), rate)
        return MHRun(samples, state, rate, steps, {"acceptance_rate": rate, "steps": steps})


def _difference(a: float, b: float) -> float:
    if a == -math.inf and b == -math.inf:
        return -math.inf
    if b == -math.inf:
        return math.inf
    return a - b


def mh_step(state: MHState, sampler: HiddenNetworkSampler, rng: np.random.Generator) -> MHState:
    return sampler.step(state, rng)


def mh_run(sampler: HiddenNetworkSampler, initial: Trajectory, n_burn: int = DEFAULT_BURN_IN,
           n_samples: int = 1, thin: int = DEFAULT_THIN, rng: Optional[np.random.Generator] = None,
           progress: bool = False) -> MHRun:
    return sampler.run(initial, n_burn, n_samples, thin, rng if rng is not None else np.random.default_rng(),
                       progress)


def simulate_event_stream(model: CoevolutionModel, obs: ObservationParams, initial: NetworkState,
                          t_end: float, rng: np.random.Generator) -> Tuple[Trajectory, EventStream]:
    """
    Draw hidden link paths and the events they emit.

    Events of each pair form a Poisson process whose rate follows the pair's
    link context.
    """
    links = simulate(model, initial, t_end, rng).trajectory
    n = model.n_actors
    events = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            fwd = links.segments(VariableId.link(i, j))
            bwd = links.segments(VariableId.link(j, i))
            cuts = sorted({0.0, t_end} | {s for s, _ in fwd} | {s for s, _ in bwd})
            for a, b in zip(cuts, cuts[1:]):
                k = _values_at(fwd, np.array([a]))[0]
                l = _values_at(bwd, np.array([a]))[0]
                count = rng.poisson(obs.rate(k, l) * (b - a))
                events.extend((t, i, j) for t in rng.uniform(a, b, size=count))
    return links, EventStream(events, n, t_end)


def smoothed_link_marginals(model: CoevolutionModel, obs: ObservationParams, events: EventStream,
                            grid: Sequence[float]) -> np.ndarray:
    """
    Exact ``P(Y_ij(t) = 1 | events)`` by forward-backward over the joint link chain.

    Only feasible for a handful of actors; the joint space has ``2^(N(N-1))`` states.

    Returns:
        np.ndarray: ``len(grid) x N x N``
    """
    links = model.definition.link_variables()
    states = joint_states(model, links)
    generator = build_joint_generator(model, links)
    arr = np.array(states)
    position = {v: k for k, v in enumerate(links)}
    p0 = model.definition.link_prior
    prior = np.prod(np.where(arr == 1, p0, 1.0 - p0), axis=1)
    leak = np.zeros(len(states))
    emission = {}
    for (i, j) in ((v.first, v.second) for v in links):
        fwd = arr[:, position[VariableId.link(i, j)]]
        bwd = arr[:, position[VariableId.link(j, i)]]
        emission[(i, j)] = obs.rates[fwd, bwd]
        leak += emission[(i, j)]
    stream = [(t, emission[(i, j)]) for t, i, j in events]
    posterior = smoothed_state_marginals(generator, prior, leak, stream, events.t_end, grid)
    n = model.n_actors
    out = np.zeros((len(grid), n, n))
    for v, k in position.items():
        out[:, v.first, v.second] = posterior @ arr[:, k]
    return out
