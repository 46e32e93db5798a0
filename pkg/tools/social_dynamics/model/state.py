"""
Network and attribute state of the actor system.
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..core.variables import VariableId, VariableKind
from ..exceptions import InvalidModelError


@dataclass(frozen=True)
class AttributeSpec:
    """An integer attribute with inclusive value range ``[z_min, z_max]``."""

    name: str
    z_min: int
    z_max: int

    def __post_init__(self):
        if int(self.z_max) < int(self.z_min):
            raise InvalidModelError(f"attribute '{self.name}' has empty range [{self.z_min}, {self.z_max}]")

    @property
    def span(self) -> int:
        """Range(z) used by the similarity effect."""
        return int(self.z_max) - int(self.z_min)

    @property
    def values(self) -> List[int]:
        return list(range(int(self.z_min), int(self.z_max) + 1))

    def contains(self, value: int) -> bool:
        return self.z_min <= value <= self.z_max


class NetworkState:
    """
    Adjacency matrix ``y`` (N x N, zero diagonal) and attribute matrix ``z``
    (H x N) with declared ranges.

    Instances are mutable so samplers can update them in place; ``copy``
    before sharing.

    Args:
        y: Binary adjacency
        z: Attribute values, one row per attribute
        attributes: Range declarations, one per row of ``z``
    """

    __slots__ = ("y", "z", "attributes")

    def __init__(self, y: np.ndarray, z: Optional[np.ndarray] = None,
                 attributes: Sequence[AttributeSpec] = (), validate: bool = True):
        self.y = np.array(y, dtype=np.int8)
        n = self.y.shape[0] if self.y.ndim == 2 else 0
        self.attributes = tuple(attributes)
        if z is None:
            z = np.zeros((len(self.attributes), n), dtype=np.int64)
        self.z = np.array(z, dtype=np.int64).reshape(len(self.attributes), n)
        if validate:
            self._validate()

    def _validate(self) -> None:
        y = self.y
        if y.ndim != 2 or y.shape[0] != y.shape[1]:
            raise InvalidModelError(f"adjacency must be square, got shape {y.shape}")
        if not np.isin(y, (0, 1)).all():
            raise InvalidModelError("adjacency entries must be 0 or 1")
        if np.any(np.diag(y) != 0):
            raise InvalidModelError("self relations are not allowed")
        for h, spec in enumerate(self.attributes):
            row = self.z[h]
            if row.size and (row.min() < spec.z_min or row.max() > spec.z_max):
                raise InvalidModelError(f"attribute '{spec.name}' outside range [{spec.z_min}, {spec.z_max}]")

    @classmethod
    def empty(cls, n_actors: int, attributes: Sequence[AttributeSpec] = (),
              z: Optional[np.ndarray] = None) -> "NetworkState":
        if z is None:
            z = np.array([[a.z_min] * n_actors for a in attributes], dtype=np.int64).reshape(len(attributes), n_actors)
        return cls(np.zeros((n_actors, n_actors), dtype=np.int8), z, attributes)

    @property
    def n_actors(self) -> int:
        return self.y.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    def copy(self) -> "NetworkState":
        return NetworkState(self.y.copy(), self.z.copy(), self.attributes, validate=False)

    def variables(self) -> List[VariableId]:
        """Links then attributes, in ``VariableId`` order."""
        n = self.n_actors
        links = [VariableId.link(i, j) for i in range(n) for j in range(n) if i != j]
        attrs = [VariableId.attribute(h, i) for h in range(self.n_attributes) for i in range(n)]
        return links + attrs

    def get(self, variable: VariableId) -> int:
        if variable.kind == VariableKind.LINK:
            return int(self.y[variable.first, variable.second])
        if variable.kind == VariableKind.ATTRIBUTE:
            return int(self.z[variable.first, variable.second])
        raise InvalidModelError(f"{variable} is not part of the network state")

    def set(self, variable: VariableId, value: int) -> None:
        if variable.kind == VariableKind.LINK:
            self.y[variable.first, variable.second] = value
        elif variable.kind == VariableKind.ATTRIBUTE:
            self.z[variable.first, variable.second] = value
        else:
            raise InvalidModelError(f"{variable} is not part of the network state")

    def to_assignment(self) -> Dict[VariableId, int]:
        return {v: self.get(v) for v in self.variables()}

    @classmethod
    def from_assignment(cls, assignment: Mapping[VariableId, int], n_actors: int,
                        attributes: Sequence[AttributeSpec] = ()) -> "NetworkState":
        """Build from a ``{variable: value}`` mapping; observation variables are ignored."""
        state = cls.empty(n_actors, attributes)
        for v, x in assignment.items():
            if v.kind != VariableKind.OBS:
                v.check_bounds(n_actors, len(attributes))
                state.set(v, int(x))
        state._validate()
        return state

    def key(self) -> bytes:
        """Hashable fingerprint of the full state."""
        return self.y.tobytes() + self.z.tobytes()

    def __eq__(self, other) -> bool:
        return (isinstance(other, NetworkState) and np.array_equal(self.y, other.y)
                and np.array_equal(self.z, other.z) and self.attributes == other.attributes)

    def __repr__(self) -> str:
        return f"NetworkState(actors={self.n_actors}, links={int(self.y.sum())}, attributes={self.n_attributes})"
