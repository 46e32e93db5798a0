"""
Sufficient statistics and trajectory log-likelihood.

For a variable X with parents U, ``T[x|u]`` is the time spent in x while
U = u and ``M[x,x'|u]`` counts x -> x' transitions in that context. The
log-density of a trajectory (starting distribution omitted) is

    sum_{u,x} -q_{x|u} T[x|u] + sum_{u,x,x'} M[x,x'|u] ln q_{xx'|u}

which is the familiar ``M[x|u] ln q_x - q_x T + M ln theta`` form regrouped.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, DefaultDict, Dict, Hashable, Iterable, List, Mapping, NamedTuple, Optional, Tuple

from .trajectory import Trajectory
from .variables import VariableId

NO_CONTEXT = ()

ContextFn = Callable[[VariableId, Mapping[VariableId, int]], Hashable]


class LogDensity(NamedTuple):
    """
    A log-density with a structured zero-probability flag.

    ``impossible`` lists ``(variable, context, from_state, to_state)`` for
    every recorded transition whose rate is zero; ``value`` is then -inf.
    """

    value: float
    impossible: Tuple[Tuple[VariableId, Hashable, int, int], ...] = ()

    @property
    def is_possible(self) -> bool:
        return not self.impossible and self.value > -math.inf

    def __float__(self) -> float:
        return self.value

    def __add__(self, other):
        if isinstance(other, LogDensity):
            return LogDensity(self.value + other.value, self.impossible + other.impossible)
        return LogDensity(self.value + float(other), self.impossible)

    __radd__ = __add__


@dataclass
class VariableStats:
    durations: DefaultDict[Tuple[Hashable, int], float] = field(default_factory=lambda: defaultdict(float))
    counts: DefaultDict[Tuple[Hashable, int, int], int] = field(default_factory=lambda: defaultdict(int))

    def T(self, x: int, u: Hashable = NO_CONTEXT) -> float:
        return self.durations.get((u, x), 0.0)

    def M(self, x: int, x_next: Optional[int] = None, u: Hashable = NO_CONTEXT) -> int:
        """``M[x,x'|u]``, or ``M[x|u]`` when ``x_next`` is omitted."""
        if x_next is not None:
            return self.counts.get((u, x, x_next), 0)
        return sum(n for (c, a, _), n in self.counts.items() if c == u and a == x)

    def contexts(self) -> List[Hashable]:
        return list(dict.fromkeys([u for u, _ in self.durations] + [u for u, _, _ in self.counts]))

    @property
    def total_time(self) -> float:
        return math.fsum(self.durations.values())

    @property
    def total_transitions(self) -> int:
        return sum(self.counts.values())


class SufficientStats:
    """Per-variable T / M tallies of one or more trajectories."""

    def __init__(self, t_end: float = 0.0):
        self.t_end = float(t_end)
        self.variables: Dict[VariableId, VariableStats] = {}

    def __getitem__(self, variable: VariableId) -> VariableStats:
        return self.variables[variable]

    def __contains__(self, variable: VariableId) -> bool:
        return variable in self.variables

    def stats_for(self, variable: VariableId) -> VariableStats:
        return self.variables.setdefault(variable, VariableStats())

    def merge(self, other: "SufficientStats") -> "SufficientStats":
        """Pool the tallies of two sets of trajectories."""
        out = SufficientStats(self.t_end + other.t_end)
        for source in (self, other):
            for v, st in source.variables.items():
                target = out.stats_for(v)
                for key, dt in st.durations.items():
                    target.durations[key] += dt
                for key, n in st.counts.items():
                    target.counts[key] += n
        return out


def collect_sufficient_stats(trajectory: Trajectory, context_fn: Optional[ContextFn] = None,
                             variables: Optional[Iterable[VariableId]] = None) -> SufficientStats:
    """
    Tally ``T[x|u]`` and ``M[x,x'|u]`` over a trajectory.

    ``context_fn(variable, state)`` returns the parent instantiation of a
    variable given the full current state. If the callable also provides
    ``bind(state)``, that is invoked once per interval and the returned
    resolver is used for every variable, which lets models share work
    between variables.

    Args:
        trajectory: Trajectory to summarise
        context_fn: Context resolver; every variable has a single empty
            context when omitted
        variables: Restrict the tally to these variables

    Returns:
        SufficientStats: Exact tallies
    """
    selected = list(variables) if variables is not None else trajectory.variables
    stats = SufficientStats(trajectory.t_end)
    per_var = {v: stats.stats_for(v) for v in selected}
    binder = getattr(context_fn, "bind", None)

    for start, end, state, transition in trajectory.sweep():
        if context_fn is None:
            resolve = None
        elif binder is not None:
            resolve = binder(state)
        else:
            resolve = (lambda v, s=state: context_fn(v, s))
        dt = end - start
        contexts = {}
        for v, st in per_var.items():
            u = NO_CONTEXT if resolve is None else resolve(v)
            contexts[v] = u
            if dt > 0:
                st.durations[(u, state[v])] += dt
        if transition is not None and transition.variable in per_var:
            v = transition.variable
            per_var[v].counts[(contexts[v], transition.old_state, transition.new_state)] += 1
    return stats


def log_likelihood(stats: SufficientStats, intensity_fn: Callable[[VariableId, Hashable], object],
                   variables: Optional[Iterable[VariableId]] = None) -> LogDensity:
    """
    Log-density of the tallied trajectories.

    Args:
        stats: Sufficient statistics
        intensity_fn: ``(variable, context) -> rates`` where ``rates`` offers
            ``exit_rate(x)`` and ``rate(x, x_next)`` (an ``IntensityMatrix``
            qualifies)
        variables: Restrict the sum to these variables

    Returns:
        LogDensity: Value and the impossible transitions, if any
    """
    selected = list(variables) if variables is not None else list(stats.variables)
    terms = []
    impossible = []
    for v in selected:
        st = stats.variables.get(v)
        if st is None:
            continue
        cache = {}

        def rates_for(u):
            if u not in cache:
                cache[u] = intensity_fn(v, u)
            return cache[u]

        for (u, x), dt in st.durations.items():
            if dt > 0:
                terms.append(-rates_for(u).exit_rate(x) * dt)
        for (u, x, x_next), n in st.counts.items():
            if n == 0:
                continue
            q = rates_for(u).rate(x, x_next)
            if q > 0:
                terms.append(n * math.log(q))
            else:
                impossible.append((v, u, x, x_next))
    if impossible:
        return LogDensity(-math.inf, tuple(impossible))
    return LogDensity(math.fsum(terms))
