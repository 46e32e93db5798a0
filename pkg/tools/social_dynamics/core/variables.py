"""
Variable identities for the factored process.

Every process variable is a link ``Y(i,j)``, an attribute ``Z(h,i)`` or an
observation toggle ``O(i,j)``. Identities order by (kind, first index,
second index); that order fixes RNG consumption and breaks exact time ties.
"""

import re
from dataclasses import dataclass
from enum import IntEnum

from ..exceptions import InvalidModelError


class VariableKind(IntEnum):
    LINK = 0
    ATTRIBUTE = 1
    OBS = 2


_PREFIX = {VariableKind.LINK: "Y", VariableKind.ATTRIBUTE: "Z", VariableKind.OBS: "O"}
_PATTERN = re.compile(r"^\s*([YZO])\((\d+),(\d+)\)\s*$")


@dataclass(frozen=True, order=True)
class VariableId:
    """
    Identity of a single process variable.

    For links and observations ``first``/``second`` are the sender and
    recipient actors; for attributes they are the attribute index ``h`` and
    the actor ``i``.
    """

    kind: VariableKind
    first: int
    second: int

    def __post_init__(self):
        if self.first < 0 or self.second < 0:
            raise InvalidModelError(f"negative index in {self}")
        if self.kind != VariableKind.ATTRIBUTE and self.first == self.second:
            raise InvalidModelError(f"self relation {self} is not a variable")

    @classmethod
    def link(cls, i: int, j: int) -> "VariableId":
        return cls(VariableKind.LINK, int(i), int(j))

    @classmethod
    def attribute(cls, h: int, i: int) -> "VariableId":
        return cls(VariableKind.ATTRIBUTE, int(h), int(i))

    @classmethod
    def obs(cls, i: int, j: int) -> "VariableId":
        return cls(VariableKind.OBS, int(i), int(j))

    @property
    def is_link(self) -> bool:
        return self.kind == VariableKind.LINK

    @property
    def is_attribute(self) -> bool:
        return self.kind == VariableKind.ATTRIBUTE

    @property
    def actor(self) -> int:
        """The actor who controls this variable."""
        return self.second if self.kind == VariableKind.ATTRIBUTE else self.first

    def check_bounds(self, n_actors: int, n_attributes: int = 0) -> None:
        """
        Raise if the indices fall outside the declared system.

        Args:
            n_actors: Number of actors N
            n_attributes: Number of attributes H
        """
        if self.kind == VariableKind.ATTRIBUTE:
            ok = self.first < n_attributes and self.second < n_actors
        else:
            ok = self.first < n_actors and self.second < n_actors
        if not ok:
            raise InvalidModelError(
                f"{self} outside system of {n_actors} actors / {n_attributes} attributes")

    def __str__(self) -> str:
        return f"{_PREFIX[self.kind]}({self.first},{self.second})"

    @classmethod
    def parse(cls, text: str) -> "VariableId":
        """
        Parse the textual form produced by ``str()``, e.g. ``Y(0,3)``.

        Raises:
            ValueError: If the text is not a variable identity
        """
        match = _PATTERN.match(text)
        if not match:
            raise ValueError(f"not a variable identity: {text!r}")
        prefix, a, b = match.groups()
        kind = {"Y": VariableKind.LINK, "Z": VariableKind.ATTRIBUTE, "O": VariableKind.OBS}[prefix]
        return cls(kind, int(a), int(b))
