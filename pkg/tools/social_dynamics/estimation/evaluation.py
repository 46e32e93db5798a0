"""Held-out log-likelihood of fully observed trajectories."""

import logging
from typing import List, Sequence

import numpy as np
import pandas as pd

from ..core.statistics import LogDensity
from ..core.trajectory import Trajectory
from ..exceptions import UsageError
from ..model.coevolution import CoevolutionModel

logger = logging.getLogger(__name__)


def heldout_loglik(model: CoevolutionModel, trajectories: Sequence[Trajectory]) -> List[LogDensity]:
    """
    Exact log-density of each test trajectory given its initial state.

    Raises:
        UsageError: If a trajectory does not cover exactly the model's variables
    """
    expected = set(model.definition.variables())
    out = []
    for k, traj in enumerate(trajectories):
        if set(traj.variables) != expected:
            raise UsageError(f"test trajectory {k} does not match the model's variables")
        result = model.trajectory_log_likelihood(traj)
        if not result.is_possible:
            logger.warning("Test trajectory %d is impossible under the model: %s", k, result.impossible[:3])
        out.append(result)
    return out


def heldout_table(model: CoevolutionModel, trajectories: Sequence[Trajectory],
                  names: Sequence[str] = ()) -> pd.DataFrame:
    """Per-trajectory results as ``trajectory,log_likelihood,impossible`` rows."""
    results = heldout_loglik(model, trajectories)
    labels = list(names) or [str(k) for k in range(len(results))]
    return pd.DataFrame({
        "trajectory": labels,
        "log_likelihood": [r.value for r in results],
        "impossible": [bool(r.impossible) for r in results],
    }, columns=["trajectory", "log_likelihood", "impossible"])


def total_loglik(results: Sequence[LogDensity]) -> float:
    return float(np.sum([r.value for r in results])) if results else 0.0
