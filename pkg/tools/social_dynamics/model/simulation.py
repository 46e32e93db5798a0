"""
Forward simulation of the co-evolution model.
"""

import logging
import math
from typing import List, NamedTuple, Tuple

import numpy as np

from ..core.distributions import exponential_quantile
from ..core.trajectory import Trajectory, TrajectoryBuilder
from ..core.variables import VariableId, VariableKind
from .coevolution import CoevolutionModel
from .effects import ATTRIBUTE_STEPS
from .state import NetworkState

logger = logging.getLogger(__name__)


class RateCache:
    """
    Current choice distributions and per-variable rates of a mutable state.

    Only the decision distributions reached by ``affected_decisions`` are
    recomputed after a move.

    Args:
        model: Model providing the distributions
        state: State owned (and mutated) by the cache
    """

    def __init__(self, model: CoevolutionModel, state: NetworkState):
        self.model = model
        self.state = state
        n = model.n_actors
        h_count = model.definition.n_attributes
        self.n_links = n * (n - 1)
        self.network_probs = np.zeros((n, n))
        self.link_rates = np.zeros((n, n))
        self.attribute_probs = np.zeros((h_count, n, 2))
        self.attribute_rates = np.zeros((h_count, n, 2))
        self._offdiag = ~np.eye(n, dtype=bool)
        for i in range(n):
            self._refresh((-1, i))
        for h in range(h_count):
            for i in range(n):
                self._refresh((h, i))

    def _refresh(self, key: Tuple[int, int]) -> None:
        h, i = key
        if h < 0:
            probs = self.model.network_choice_probs(i, self.state)
            self.network_probs[i] = probs
            self.link_rates[i] = self.model.network_clock_rate(i) * probs
        else:
            probs = self.model.attribute_choice_probs(i, h, self.state)
            self.attribute_probs[h, i] = probs
            self.attribute_rates[h, i] = self.model.attribute_clock_rate(h, i) * probs

    def apply(self, variable: VariableId, new_value: int) -> None:
        """Move one variable and refresh the distributions that read it."""
        keys = self.model.affected_decisions(variable, self.state)
        self.state.set(variable, new_value)
        for key in keys:
            self._refresh(key)

    def index(self, variable: VariableId) -> int:
        """Position of a variable in the flat ``VariableId`` ordering."""
        n = self.model.n_actors
        if variable.kind == VariableKind.LINK:
            i, j = variable.first, variable.second
            return i * (n - 1) + (j if j < i else j - 1)
        return self.n_links + variable.first * n + variable.second

    def exit_rates(self) -> np.ndarray:
        """Exit rate of every variable in ``VariableId`` order."""
        return np.concatenate([self.link_rates[self._offdiag], self.attribute_rates.sum(axis=2).ravel()])

    def moves(self, variable: VariableId) -> List[Tuple[int, float]]:
        """``(next_value, rate)`` for every move with positive rate."""
        if variable.kind == VariableKind.LINK:
            i, j = variable.first, variable.second
            rate = self.link_rates[i, j]
            return [(1 - int(self.state.y[i, j]), float(rate))] if rate > 0 else []
        h, i = variable.first, variable.second
        z = int(self.state.z[h, i])
        return [(z + int(s), float(r)) for s, r in zip(ATTRIBUTE_STEPS, self.attribute_rates[h, i]) if r > 0]

    def rate(self, variable: VariableId, new_value: int) -> float:
        return dict(self.moves(variable)).get(int(new_value), 0.0)


class Simulation(NamedTuple):
    trajectory: Trajectory
    log_density: float


def _pick(cumulative: np.ndarray, u: float) -> int:
    k = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    return min(k, len(cumulative) - 1)


def simulate(model: CoevolutionModel, initial: NetworkState, t_end: float,
             rng: np.random.Generator) -> Simulation:
    """
    Draw a trajectory and accumulate its log-density along the way.

    The joint exit rate is constant, so the next firing time is exponential
    at that rate; the firing clock is picked in proportion to its rate and
    the move from the clock owner's cached choice distribution.

    Args:
        model: Model with parameters
        initial: State at time 0 (not modified)
        t_end: End of the window
        rng: Random stream

    Returns:
        Simulation: Trajectory and its log-density (initial state omitted)
    """
    d = model.definition
    n = d.n_actors
    cache = RateCache(model, initial.copy())
    builder = TrajectoryBuilder(initial.to_assignment())
    clocks = [(-1, i) for i in range(n)] + [(h, i) for h in d.movable_attributes() for i in range(n)]
    clock_rates = np.array([model.network_clock_rate(i) if h < 0 else model.attribute_clock_rate(h, i)
                            for h, i in clocks])
    total = float(clock_rates.sum())
    cumulative = np.cumsum(clock_rates)
    log_density = -total * t_end
    t = 0.0
    while total > 0:
        t += exponential_quantile(total, rng.random())
        if t >= t_end:
            break
        k = _pick(cumulative, rng.random())
        h, i = clocks[k]
        if h < 0:
            probs = cache.network_probs[i]
            j = _pick(np.cumsum(probs), rng.random())
            variable = VariableId.link(i, j)
            new_value = 1 - int(cache.state.y[i, j])
            p = probs[j]
        else:
            probs = cache.attribute_probs[h, i]
            s = _pick(np.cumsum(probs), rng.random())
            variable = VariableId.attribute(h, i)
            new_value = int(cache.state.z[h, i]) + int(ATTRIBUTE_STEPS[s])
            p = probs[s]
        log_density += math.log(clock_rates[k]) + math.log(p)
        builder.add(t, variable, new_value)
        cache.apply(variable, new_value)
    traj = builder.build(t_end, validate=False)
    logger.debug("Simulated %d transitions over [0, %s]", len(traj), t_end)
    return Simulation(traj, float(log_density))


def forward_sample(model: CoevolutionModel, initial: NetworkState, t_end: float,
                   rng: np.random.Generator) -> Trajectory:
    """Exact draw from the model over ``[0, t_end]`` starting at ``initial``."""
    return simulate(model, initial, t_end, rng).trajectory


def sample_initial_state(model: CoevolutionModel, rng: np.random.Generator) -> NetworkState:
    """Independent Bernoulli(link_prior) links and uniform attribute values."""
    d = model.definition
    n = d.n_actors
    y = (rng.random((n, n)) < d.link_prior).astype(np.int8)
    np.fill_diagonal(y, 0)
    z = np.array([rng.integers(a.z_min, a.z_max + 1, size=n) for a in d.attributes],
                 dtype=np.int64).reshape(d.n_attributes, n)
    return NetworkState(y, z, d.attributes)
