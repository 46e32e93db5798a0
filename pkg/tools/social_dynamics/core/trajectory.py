"""
Piecewise-constant trajectories of a factored continuous-time process.

A trajectory is the initial value of every variable over ``[0, t_end]`` plus
a time-ordered list of single-variable transitions. Per-variable segment
lists are derived views; the object is immutable once built.
"""

import bisect
import heapq
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from ..exceptions import EvidenceError
from .variables import VariableId


@dataclass(frozen=True, order=True)
class Transition:
    time: float
    variable: VariableId
    old_state: int
    new_state: int


class Trajectory:
    """
    Immutable trajectory over ``[0, t_end]``.

    Args:
        t_end: End of the observation window
        initial: Value of every variable at time 0
        transitions: Transitions in strictly increasing time order
        validate: Check ordering and state bookkeeping
    """

    def __init__(self, t_end: float, initial: Mapping[VariableId, int],
                 transitions: Sequence[Transition] = (), validate: bool = True):
        self._t_end = float(t_end)
        self._initial: Dict[VariableId, int] = {v: int(initial[v]) for v in sorted(initial)}
        self._transitions: Tuple[Transition, ...] = tuple(transitions)
        self._by_var: Optional[Dict[VariableId, List[Transition]]] = None
        if validate:
            self._validate()

    def _validate(self) -> None:
        if self._t_end < 0:
            raise EvidenceError(f"negative trajectory end time {self._t_end}")
        current = dict(self._initial)
        last = 0.0
        for tr in self._transitions:
            if tr.variable not in current:
                raise EvidenceError(f"transition of unknown variable {tr.variable}")
            if not tr.time > last:
                raise EvidenceError(f"transition times must be strictly increasing (at {tr.time})")
            if tr.time >= self._t_end:
                raise EvidenceError(f"transition at {tr.time} outside [0, {self._t_end})")
            if current[tr.variable] != tr.old_state or tr.old_state == tr.new_state:
                raise EvidenceError(f"inconsistent transition {tr}")
            current[tr.variable] = tr.new_state
            last = tr.time

    @property
    def t_end(self) -> float:
        return self._t_end

    @property
    def initial(self) -> Dict[VariableId, int]:
        return dict(self._initial)

    @property
    def transitions(self) -> Tuple[Transition, ...]:
        return self._transitions

    @property
    def variables(self) -> List[VariableId]:
        return list(self._initial)

    def __len__(self) -> int:
        return len(self._transitions)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Trajectory) and self._t_end == other._t_end
                and self._initial == other._initial and self._transitions == other._transitions)

    def __repr__(self) -> str:
        return (f"Trajectory(t_end={self._t_end}, variables={len(self._initial)}, "
                f"transitions={len(self._transitions)})")

    def _index(self) -> Dict[VariableId, List[Transition]]:
        if self._by_var is None:
            by_var: Dict[VariableId, List[Transition]] = {v: [] for v in self._initial}
            for tr in self._transitions:
                by_var[tr.variable].append(tr)
            self._by_var = by_var
        return self._by_var

    def transitions_of(self, variable: VariableId) -> List[Transition]:
        return list(self._index()[variable])

    def segments(self, variable: VariableId) -> List[Tuple[float, int]]:
        """
        Segment list of one variable.

        Returns:
            list: ``(start_time, value)`` pairs tiling ``[0, t_end)``
        """
        segs = [(0.0, self._initial[variable])]
        segs.extend((tr.time, tr.new_state) for tr in self._index()[variable])
        return segs

    def value_at(self, variable: VariableId, t: float) -> int:
        """Value at time t (right-continuous: a transition at t is included)."""
        trs = self._index()[variable]
        k = bisect.bisect_right([tr.time for tr in trs], t)
        return trs[k - 1].new_state if k else self._initial[variable]

    def state_at(self, t: float) -> Dict[VariableId, int]:
        state = dict(self._initial)
        for tr in self._transitions:
            if tr.time > t:
                break
            state[tr.variable] = tr.new_state
        return state

    def final_state(self) -> Dict[VariableId, int]:
        return self.state_at(self._t_end)

    def snapshot(self, times: Iterable[float]) -> List[Tuple[float, Dict[VariableId, int]]]:
        """Full states at the given times, as recorded by a panel survey."""
        out = []
        for t in times:
            if not 0.0 <= t <= self._t_end:
                raise EvidenceError(f"snapshot time {t} outside [0, {self._t_end}]")
            out.append((float(t), self.state_at(t)))
        return out

    def sweep(self) -> Iterator[Tuple[float, float, Dict[VariableId, int], Optional[Transition]]]:
        """
        Walk the trajectory interval by interval.

        Yields ``(start, end, state, transition)`` where ``state`` holds on
        ``[start, end)`` and ``transition`` is the change at ``end`` (None for
        the last interval). The state dict is reused between iterations.
        """
        state = dict(self._initial)
        start = 0.0
        for tr in self._transitions:
            yield start, tr.time, state, tr
            state[tr.variable] = tr.new_state
            start = tr.time
        yield start, self._t_end, state, None

    def restricted(self, variables: Iterable[VariableId]) -> "Trajectory":
        keep = set(variables)
        return Trajectory(self._t_end, {v: x for v, x in self._initial.items() if v in keep},
                          [tr for tr in self._transitions if tr.variable in keep], validate=False)

    def with_variable_path(self, variable: VariableId, initial_value: int,
                           transitions: Sequence[Transition]) -> "Trajectory":
        """
        Copy with one variable's path replaced.

        Raises:
            EvidenceError: If a new transition ties with an existing one
        """
        others = [tr for tr in self._transitions if tr.variable != variable]
        merged = list(heapq.merge(others, transitions, key=lambda tr: tr.time))
        initial = dict(self._initial)
        initial[variable] = int(initial_value)
        return Trajectory(self._t_end, initial, merged)

    def truncated(self, t_end: float) -> "Trajectory":
        """The prefix of this trajectory on ``[0, t_end]``."""
        return Trajectory(t_end, self._initial,
                          [tr for tr in self._transitions if tr.time < t_end], validate=False)


class TrajectoryBuilder:
    """Incremental construction used by the samplers."""

    def __init__(self, initial: Mapping[VariableId, int]):
        self.initial = {v: int(x) for v, x in initial.items()}
        self.current = dict(self.initial)
        self.transitions: List[Transition] = []

    def add(self, time: float, variable: VariableId, new_state: int) -> Transition:
        tr = Transition(float(time), variable, self.current[variable], int(new_state))
        self.current[variable] = int(new_state)
        self.transitions.append(tr)
        return tr

    def build(self, t_end: float, validate: bool = True) -> Trajectory:
        return Trajectory(t_end, self.initial, self.transitions, validate=validate)
