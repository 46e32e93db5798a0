"""
Evidence about a trajectory: point snapshots, interval observations and
fully observed variables.
"""

import bisect
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from ..exceptions import EvidenceError
from .trajectory import Trajectory
from .variables import VariableId


@dataclass(frozen=True)
class PointObservation:
    time: float
    variable: VariableId
    value: int


@dataclass(frozen=True)
class IntervalObservation:
    """The variable holds ``value`` throughout ``[t_start, t_end]``."""

    variable: VariableId
    t_start: float
    t_end: float
    value: int


@dataclass(frozen=True)
class FullyObservedVariable:
    """Complete segment list ``((start, value), ...)`` starting at time 0."""

    variable: VariableId
    segments: Tuple[Tuple[float, int], ...]


EvidenceItem = Union[PointObservation, IntervalObservation, FullyObservedVariable]


@dataclass(frozen=True)
class Clamp:
    """A window in which a variable's path is dictated by evidence."""

    start: float
    end: float
    segments: Tuple[Tuple[float, int], ...]

    def value_at(self, t: float) -> int:
        starts = [s for s, _ in self.segments]
        return self.segments[bisect.bisect_right(starts, t) - 1][1]


@dataclass
class VariableEvidence:
    """Per-variable view: point requirements and clamped windows, time ordered."""

    points: List[Tuple[float, int]] = field(default_factory=list)
    clamps: List[Clamp] = field(default_factory=list)

    def requirements(self) -> List[Tuple[float, int]]:
        """Every (time, value) the path must hit, including clamp starts."""
        reqs = list(self.points) + [(c.start, c.segments[0][1]) for c in self.clamps]
        return sorted(reqs)


class Evidence:
    """
    Collection of evidence items over ``[0, t_end]``.

    Args:
        items: Evidence items
        t_end: End of the window the evidence refers to
    """

    def __init__(self, items: Iterable[EvidenceItem], t_end: float):
        self.items: Tuple[EvidenceItem, ...] = tuple(items)
        self.t_end = float(t_end)
        self._by_var = self._organize()

    def __len__(self) -> int:
        return len(self.items)

    @property
    def variables(self) -> List[VariableId]:
        return sorted(self._by_var)

    def for_variable(self, variable: VariableId) -> VariableEvidence:
        return self._by_var.get(variable, VariableEvidence())

    def observation_times(self) -> List[float]:
        times = set()
        for ev in self._by_var.values():
            times.update(t for t, _ in ev.points)
            for c in ev.clamps:
                times.update(s for s, _ in c.segments)
                times.add(c.start)
                times.add(c.end)
        return sorted(times)

    def _organize(self) -> Dict[VariableId, VariableEvidence]:
        by_var: Dict[VariableId, VariableEvidence] = {}
        for item in self.items:
            ev = by_var.setdefault(item.variable, VariableEvidence())
            if isinstance(item, PointObservation):
                if not 0.0 <= item.time <= self.t_end:
                    raise EvidenceError(f"point observation at {item.time} outside [0, {self.t_end}]")
                ev.points.append((float(item.time), int(item.value)))
            elif isinstance(item, IntervalObservation):
                if not (0.0 <= item.t_start < item.t_end <= self.t_end):
                    raise EvidenceError(
                        f"interval [{item.t_start}, {item.t_end}] invalid for window [0, {self.t_end}]")
                ev.clamps.append(Clamp(float(item.t_start), float(item.t_end),
                                       ((float(item.t_start), int(item.value)),)))
            elif isinstance(item, FullyObservedVariable):
                segs = tuple((float(s), int(x)) for s, x in item.segments)
                if not segs or segs[0][0] != 0.0:
                    raise EvidenceError(f"full observation of {item.variable} must start at 0")
                starts = [s for s, _ in segs]
                if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= self.t_end > 0:
                    raise EvidenceError(f"segments of {item.variable} must increase inside the window")
                if any(x == y for (_, x), (_, y) in zip(segs, segs[1:])):
                    raise EvidenceError(f"consecutive segments of {item.variable} repeat a value")
                ev.clamps.append(Clamp(0.0, self.t_end, segs))
            else:
                raise EvidenceError(f"unknown evidence item {item!r}")
        for variable, ev in by_var.items():
            ev.points.sort()
            ev.clamps.sort(key=lambda c: c.start)
            self._check_consistency(variable, ev)
        return by_var

    @staticmethod
    def _check_consistency(variable: VariableId, ev: VariableEvidence) -> None:
        for a, b in zip(ev.clamps, ev.clamps[1:]):
            if b.start < a.end or (b.start == a.end and a.value_at(a.end) != b.segments[0][1]):
                raise EvidenceError(f"overlapping interval evidence for {variable}")
        for (t1, x1), (t2, x2) in zip(ev.points, ev.points[1:]):
            if t1 == t2 and x1 != x2:
                raise EvidenceError(f"conflicting point observations for {variable} at {t1}")
        for t, x in ev.points:
            for c in ev.clamps:
                if c.start <= t <= c.end and c.value_at(t) != x:
                    raise EvidenceError(f"point observation of {variable} at {t} contradicts interval evidence")

    def is_complete_for(self, variables: Iterable[VariableId]) -> bool:
        """True when every listed variable is clamped over the whole window."""
        for v in variables:
            ev = self._by_var.get(v)
            if ev is None or not any(c.start == 0.0 and c.end == self.t_end for c in ev.clamps):
                return False
        return True


def snapshot_evidence(snapshots: Sequence[Tuple[float, Mapping[VariableId, int]]],
                      t_end: Optional[float] = None) -> Evidence:
    """
    Point evidence from full snapshots.

    Args:
        snapshots: ``(time, {variable: value})`` pairs
        t_end: Window end; defaults to the last snapshot time

    Returns:
        Evidence: One point observation per variable per snapshot
    """
    items = [PointObservation(float(t), v, int(x)) for t, state in snapshots for v, x in state.items()]
    end = t_end if t_end is not None else max(float(t) for t, _ in snapshots)
    return Evidence(items, end)


def fully_observed(trajectory: Trajectory) -> Evidence:
    """Evidence that clamps every variable of a trajectory to its path."""
    items = [FullyObservedVariable(v, tuple(trajectory.segments(v))) for v in trajectory.variables]
    return Evidence(items, trajectory.t_end)


def validate_trajectory_against_evidence(trajectory: Trajectory, evidence: Evidence) -> List[str]:
    """
    List every way a trajectory contradicts the evidence.

    Returns:
        list: Issue descriptions; empty when consistent
    """
    issues = []
    if trajectory.t_end < evidence.t_end:
        issues.append(f"trajectory ends at {trajectory.t_end} before evidence window {evidence.t_end}")
        return issues
    known = set(trajectory.variables)
    for variable in evidence.variables:
        if variable not in known:
            issues.append(f"evidence refers to {variable}, absent from trajectory")
            continue
        ev = evidence.for_variable(variable)
        for t, x in ev.points:
            actual = trajectory.value_at(variable, t)
            if actual != x:
                issues.append(f"{variable} is {actual} at {t}, evidence says {x}")
        segs = trajectory.segments(variable)
        for clamp in ev.clamps:
            inside = [(s, x) for s, x in segs if clamp.start < s < clamp.end]
            expected = [(s, x) for s, x in clamp.segments if s > clamp.start]
            if trajectory.value_at(variable, clamp.start) != clamp.segments[0][1] or inside != expected:
                issues.append(f"{variable} departs from interval evidence on [{clamp.start}, {clamp.end}]")
    return issues
