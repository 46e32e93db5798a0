"""Outcome of a parameter fit."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from ..inference.hidden import ObservationParams
from ..model.params import ModelParams


@dataclass
class FitResult:
    """
    Fitted parameters with the iteration trace.

    Attributes:
        params: Final model parameters
        converged: False when the iteration budget ran out first
        trace: One record per M-step (or Newton step)
        diagnostics: Run-level diagnostics and flags
        observation: Fitted event rates (hidden model only)
        method: ``mcem``, ``complete``, ``mom`` or ``hidden``
    """

    params: ModelParams
    converged: bool
    trace: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    observation: Optional[ObservationParams] = None
    method: str = "mcem"

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trace)

    @property
    def flags(self) -> List[str]:
        return list(self.diagnostics.get("flags", []))
