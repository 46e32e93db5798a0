"""
Model definitions (the fixed skeleton) and their parameters.
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.variables import VariableId
from ..exceptions import InvalidModelError
from .effects import EffectSpec
from .state import AttributeSpec

DEFAULT_LINK_PRIOR = 0.1


@dataclass(frozen=True)
class ModelDefinition:
    """
    Everything about a model except its parameter values.

    Args:
        n_actors: Number of actors N (at least 2)
        attributes: Declared attributes and their ranges
        network_effects: Effects of the network utility
        attribute_effects: Effects of the attribute utilities; each carries
            the attribute it belongs to in ``target``
        shared_rates: Estimate one rate shared by all actors
        time_unit: Label carried by every data file
        actor_names: Optional display names
        link_prior: Probability that a link is present at time 0 when the
            initial network is unobserved
    """

    n_actors: int
    attributes: Tuple[AttributeSpec, ...] = ()
    network_effects: Tuple[EffectSpec, ...] = ()
    attribute_effects: Tuple[EffectSpec, ...] = ()
    shared_rates: bool = True
    time_unit: str = "day"
    actor_names: Optional[Tuple[str, ...]] = None
    link_prior: float = DEFAULT_LINK_PRIOR

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "network_effects", tuple(self.network_effects))
        object.__setattr__(self, "attribute_effects", tuple(self.attribute_effects))
        if self.actor_names is not None:
            object.__setattr__(self, "actor_names", tuple(str(a) for a in self.actor_names))
        self.validate()

    def validate(self) -> None:
        if self.n_actors < 2:
            raise InvalidModelError(f"a network needs at least 2 actors, got {self.n_actors}")
        if self.actor_names is not None and len(self.actor_names) != self.n_actors:
            raise InvalidModelError("actor_names must list every actor")
        if not 0.0 <= self.link_prior <= 1.0:
            raise InvalidModelError(f"link_prior must lie in [0, 1], got {self.link_prior}")
        h_count = len(self.attributes)
        for spec in self.network_effects:
            if not spec.is_network:
                raise InvalidModelError(f"attribute effect {spec} listed among network effects")
            spec.check(h_count)
        for spec in self.attribute_effects:
            if spec.is_network:
                raise InvalidModelError(f"network effect {spec} listed among attribute effects")
            spec.check(h_count)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_network_effects(self) -> int:
        return len(self.network_effects)

    @property
    def n_attribute_effects(self) -> int:
        return len(self.attribute_effects)

    def attribute_effect_indices(self, h: int) -> np.ndarray:
        return np.array([k for k, s in enumerate(self.attribute_effects) if s.target == h], dtype=int)

    def movable_attributes(self) -> List[int]:
        """Attributes with at least two values (the others never change)."""
        return [h for h, a in enumerate(self.attributes) if a.span >= 1]

    def link_variables(self) -> List[VariableId]:
        n = self.n_actors
        return [VariableId.link(i, j) for i in range(n) for j in range(n) if i != j]

    def attribute_variables(self) -> List[VariableId]:
        return [VariableId.attribute(h, i) for h in range(self.n_attributes) for i in range(self.n_actors)]

    def variables(self) -> List[VariableId]:
        return self.link_variables() + self.attribute_variables()

    def actor_name(self, i: int) -> str:
        return self.actor_names[i] if self.actor_names else str(i)

    def network_labels(self) -> List[str]:
        return [s.label(self.attributes) for s in self.network_effects]

    def attribute_labels(self) -> List[str]:
        return [f"{self.attributes[s.target].name}:{s.label(self.attributes)}" for s in self.attribute_effects]


@dataclass
class ModelParams:
    """
    Parameter values: per-actor rates and effect weights.

    Shared rates are stored as constant vectors.
    """

    network_rate: np.ndarray
    attribute_rate: np.ndarray
    network_weights: np.ndarray
    attribute_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.network_rate = np.atleast_1d(np.asarray(self.network_rate, dtype=float)).copy()
        self.attribute_rate = np.atleast_1d(np.asarray(self.attribute_rate, dtype=float)).copy()
        self.network_weights = np.atleast_1d(np.asarray(self.network_weights, dtype=float)).copy()
        self.attribute_weights = np.atleast_1d(np.asarray(self.attribute_weights, dtype=float)).copy()
        for name in ("network_rate", "attribute_rate", "network_weights", "attribute_weights"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidModelError(f"{name} must be finite")
        if np.any(self.network_rate < 0) or np.any(self.attribute_rate < 0):
            raise InvalidModelError("rates must be non-negative")

    @classmethod
    def shared(cls, n_actors: int, network_rate: float, attribute_rate: float = 0.0,
               network_weights: Sequence[float] = (), attribute_weights: Sequence[float] = ()) -> "ModelParams":
        return cls(np.full(n_actors, float(network_rate)), np.full(n_actors, float(attribute_rate)),
                   np.asarray(network_weights, dtype=float), np.asarray(attribute_weights, dtype=float))

    @classmethod
    def initial(cls, definition: ModelDefinition, network_rate: float = 1.0,
                attribute_rate: float = 1.0) -> "ModelParams":
        """Zero weights and the given shared rates."""
        return cls.shared(definition.n_actors, network_rate,
                          attribute_rate if definition.n_attributes else 0.0,
                          np.zeros(definition.n_network_effects), np.zeros(definition.n_attribute_effects))

    def check(self, definition: ModelDefinition) -> "ModelParams":
        n = definition.n_actors
        if self.network_rate.shape != (n,) or self.attribute_rate.shape != (n,):
            raise InvalidModelError(f"rate vectors must have length {n}")
        if self.network_weights.shape != (definition.n_network_effects,):
            raise InvalidModelError(
                f"expected {definition.n_network_effects} network weights, got {self.network_weights.size}")
        if self.attribute_weights.shape != (definition.n_attribute_effects,):
            raise InvalidModelError(
                f"expected {definition.n_attribute_effects} attribute weights, got {self.attribute_weights.size}")
        return self

    @property
    def is_shared(self) -> bool:
        return bool(np.all(self.network_rate == self.network_rate[0])
                    and np.all(self.attribute_rate == self.attribute_rate[0]))

    def copy(self, **changes) -> "ModelParams":
        base = replace(self)
        for k, v in changes.items():
            setattr(base, k, np.atleast_1d(np.asarray(v, dtype=float)).copy())
        base.__post_init__()
        return base

    def distance(self, other: "ModelParams") -> float:
        """Largest absolute difference over all entries."""
        parts = [np.abs(a - b).max(initial=0.0) for a, b in (
            (self.network_rate, other.network_rate), (self.attribute_rate, other.attribute_rate),
            (self.network_weights, other.network_weights), (self.attribute_weights, other.attribute_weights))]
        return float(max(parts))
