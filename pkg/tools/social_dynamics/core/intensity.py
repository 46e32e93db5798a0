"""
Intensity (rate) matrices of continuous-time Markov processes.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..exceptions import InvalidRateError

ROW_SUM_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class IntensityMatrix:
    """
    A ``dim x dim`` generator: non-negative off-diagonal rates, rows summing
    to zero. The array is made read-only on construction.
    """

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 2:
            raise InvalidRateError(f"intensity matrix must be square with dim >= 2, got {q.shape}")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            raise InvalidRateError("intensity matrix has negative off-diagonal rates")
        scale = max(1.0, float(np.abs(q).max()))
        if np.any(np.abs(q.sum(axis=1)) > ROW_SUM_TOLERANCE * scale):
            raise InvalidRateError("intensity matrix rows must sum to zero")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_rates(cls, rates: np.ndarray) -> "IntensityMatrix":
        """Build from off-diagonal rates; the diagonal is filled in."""
        rates = np.array(rates, dtype=float)
        np.fill_diagonal(rates, 0.0)
        np.fill_diagonal(rates, -rates.sum(axis=1))
        return cls(rates)

    @classmethod
    def two_state(cls, up: float, down: float) -> "IntensityMatrix":
        return cls(np.array([[-up, up], [down, -down]], dtype=float))

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def exit_rate(self, x: int) -> float:
        """Total rate q_x of leaving state x."""
        return float(-self.q[x, x])

    def rate(self, x: int, x_next: int) -> float:
        return float(self.q[x, x_next])

    def transition_probs(self, x: int) -> np.ndarray:
        """Jump distribution theta_{x,.}; zero vector for absorbing states."""
        row = np.array(self.q[x], dtype=float)
        row[x] = 0.0
        total = row.sum()
        return row / total if total > 0 else row

    def entries(self) -> Sequence[float]:
        return tuple(self.q.ravel())

    def __eq__(self, other) -> bool:
        return isinstance(other, IntensityMatrix) and np.array_equal(self.q, other.q)

    def __hash__(self) -> int:
        return hash(self.q.tobytes())
