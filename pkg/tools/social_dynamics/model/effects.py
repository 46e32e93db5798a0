"""
Effects: scalar features of the network and attributes seen from one actor.

Utilities are weighted sums of effects. Choice probabilities only need the
effect vectors of every candidate move, so each effect also has a change
rule that produces the post-move values for all candidates at once.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from ..exceptions import InvalidModelError
from .state import AttributeSpec, NetworkState


class EffectKind(str, Enum):
    DENSITY = "density"
    RECIPROCITY = "reciprocity"
    SIMILARITY = "similarity"
    TENDENCY = "tendency"
    ACTIVITY = "activity"
    POPULARITY = "popularity"


NETWORK_ONLY = {EffectKind.ACTIVITY, EffectKind.POPULARITY}
ATTRIBUTE_ONLY = {EffectKind.TENDENCY}


@dataclass(frozen=True)
class EffectSpec:
    """
    One effect in a utility function.

    ``target`` is None for the network utility and the attribute index ``h``
    for the utility of attribute ``h``. ``attribute`` names the attribute a
    similarity effect compares (defaults to the target attribute).
    """

    kind: EffectKind
    target: Optional[int] = None
    attribute: Optional[int] = None

    def __post_init__(self):
        kind = EffectKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.target is None and kind in ATTRIBUTE_ONLY:
            raise InvalidModelError(f"{kind.value} is only defined for attribute utilities")
        if self.target is not None and kind in NETWORK_ONLY:
            raise InvalidModelError(f"{kind.value} is only defined for the network utility")
        if kind == EffectKind.SIMILARITY and self.attribute is None:
            if self.target is None:
                raise InvalidModelError("network similarity needs an attribute")
            object.__setattr__(self, "attribute", self.target)
        if kind != EffectKind.SIMILARITY and self.attribute is not None:
            raise InvalidModelError(f"{kind.value} takes no attribute argument")

    @classmethod
    def network(cls, kind, attribute: Optional[int] = None) -> "EffectSpec":
        return cls(EffectKind(kind), None, attribute)

    @classmethod
    def for_attribute(cls, target: int, kind, attribute: Optional[int] = None) -> "EffectSpec":
        return cls(EffectKind(kind), int(target), attribute)

    @property
    def is_network(self) -> bool:
        return self.target is None

    def label(self, attributes: Sequence[AttributeSpec] = ()) -> str:
        """Row name used in parameter tables, e.g. ``similarity(smoke)``."""
        if self.kind == EffectKind.SIMILARITY:
            name = attributes[self.attribute].name if self.attribute < len(attributes) else str(self.attribute)
            return f"similarity({name})"
        return self.kind.value

    def check(self, n_attributes: int) -> None:
        for idx in (self.target, self.attribute):
            if idx is not None and not 0 <= idx < n_attributes:
                raise InvalidModelError(f"effect {self} refers to attribute {idx} of {n_attributes}")


def similarity_row(state: NetworkState, a: int, i: int, zi: Optional[float] = None) -> np.ndarray:
    """``sim_ij = 1 - |z_ai - z_aj| / Range(z_a)`` for every j (1 for a degenerate range)."""
    span = state.attributes[a].span
    z = state.z[a].astype(float)
    own = z[i] if zi is None else zi
    if span == 0:
        return np.ones_like(z)
    return 1.0 - np.abs(own - z) / span


def effect_value(spec: EffectSpec, i: int, state: NetworkState) -> float:
    """
    Evaluate ``s_ik`` from actor i's perspective by direct summation.

    Args:
        spec: Effect
        i: Actor
        state: Network state

    Returns:
        float: Effect value
    """
    y = state.y.astype(float)
    row = y[i]
    kind = spec.kind
    if kind == EffectKind.DENSITY:
        return float(row.sum())
    if kind == EffectKind.RECIPROCITY:
        return float(row @ y[:, i])
    if kind == EffectKind.SIMILARITY:
        sim = similarity_row(state, spec.attribute, i)
        sim[i] = 0.0
        return float(row @ sim)
    if kind == EffectKind.TENDENCY:
        return float(state.z[spec.target, i])
    if kind == EffectKind.ACTIVITY:
        return float(row @ y.sum(axis=1))
    if kind == EffectKind.POPULARITY:
        return float(row @ y.sum(axis=0))
    raise InvalidModelError(f"unknown effect {kind}")


def effect_vector(specs: Sequence[EffectSpec], i: int, state: NetworkState) -> np.ndarray:
    return np.array([effect_value(s, i, state) for s in specs], dtype=float)


def network_change_statistics(specs: Sequence[EffectSpec], i: int, state: NetworkState) -> np.ndarray:
    """
    Effect vectors of actor i after toggling each link ``i -> j``.

    Returns:
        np.ndarray: ``N x K``; row j holds ``s_i(y<i,j>, z)``, row i is zero
    """
    y = state.y.astype(float)
    n = y.shape[0]
    row = y[i]
    d = 1.0 - 2.0 * row
    out = np.zeros((n, len(specs)))
    for k, spec in enumerate(specs):
        kind = spec.kind
        if kind == EffectKind.DENSITY:
            col = row.sum() + d
        elif kind == EffectKind.RECIPROCITY:
            col = row @ y[:, i] + d * y[:, i]
        elif kind == EffectKind.SIMILARITY:
            sim = similarity_row(state, spec.attribute, i)
            sim[i] = 0.0
            col = row @ sim + d * sim
        elif kind == EffectKind.ACTIVITY:
            out_deg = y.sum(axis=1)
            col = row @ out_deg + d * out_deg
        elif kind == EffectKind.POPULARITY:
            in_deg = y.sum(axis=0)
            col = row @ in_deg + d * in_deg + (1.0 - row)
        else:
            raise InvalidModelError(f"{kind.value} cannot enter the network utility")
        out[:, k] = col
    out[i] = 0.0
    return out


ATTRIBUTE_STEPS = np.array([-1, 1])


def attribute_change_statistics(specs: Sequence[EffectSpec], h: int, i: int,
                                state: NetworkState) -> Tuple[np.ndarray, np.ndarray]:
    """
    Effect vectors of actor i after moving ``z_hi`` by -1 and +1.

    Returns:
        tuple: ``(2 x K features, feasibility mask)`` for steps ``(-1, +1)``
    """
    spec_h = state.attributes[h]
    zi = int(state.z[h, i])
    feasible = np.array([spec_h.contains(zi + step) for step in ATTRIBUTE_STEPS])
    y = state.y.astype(float)
    row = y[i]
    out = np.zeros((2, len(specs)))
    for k, spec in enumerate(specs):
        kind = spec.kind
        if kind == EffectKind.TENDENCY:
            out[:, k] = zi + ATTRIBUTE_STEPS
        elif kind == EffectKind.SIMILARITY and spec.attribute == h:
            for s, step in enumerate(ATTRIBUTE_STEPS):
                sim = similarity_row(state, h, i, zi + step)
                sim[i] = 0.0
                out[s, k] = row @ sim
        elif kind in NETWORK_ONLY:
            raise InvalidModelError(f"{kind.value} cannot enter an attribute utility")
        else:
            # does not depend on z_hi
            out[:, k] = effect_value(spec, i, state)
    return out, feasible
