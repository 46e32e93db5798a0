"""
Decision records and the conditional-logit likelihood.

Every transition of a trajectory is one decision of one actor: a choice
among candidate moves described by their post-move effect vectors. Records
are stacked into arrays so the logit terms of many trajectories are
evaluated in a few vectorised operations.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax


@dataclass
class DecisionSet:
    """
    Stacked decisions of one family (network or attribute).

    Attributes:
        features: ``R x C x K`` effect vectors of every candidate move
        mask: ``R x C`` feasibility of each candidate
        chosen: ``R`` index of the move that was made
        actors: ``R`` deciding actor
        weights: ``R`` per-record weight (importance weight of the sample)
    """

    features: np.ndarray
    mask: np.ndarray
    chosen: np.ndarray
    actors: np.ndarray
    weights: np.ndarray

    @classmethod
    def empty(cls, n_choices: int, n_effects: int) -> "DecisionSet":
        return cls(np.zeros((0, n_choices, n_effects)), np.zeros((0, n_choices), dtype=bool),
                   np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))

    @classmethod
    def stack(cls, features: Sequence[np.ndarray], mask: Sequence[np.ndarray], chosen: Sequence[int],
              actors: Sequence[int], n_choices: int, n_effects: int) -> "DecisionSet":
        if not features:
            return cls.empty(n_choices, n_effects)
        return cls(np.stack(features).reshape(len(features), n_choices, n_effects), np.stack(mask),
                   np.asarray(chosen, dtype=int), np.asarray(actors, dtype=int), np.ones(len(features)))

    def __len__(self) -> int:
        return self.chosen.shape[0]

    def reweighted(self, weight: float) -> "DecisionSet":
        return DecisionSet(self.features, self.mask, self.chosen, self.actors, self.weights * weight)

    @staticmethod
    def concatenate(sets: Sequence["DecisionSet"]) -> "DecisionSet":
        sets = [s for s in sets if len(s)] or list(sets[:1])
        return DecisionSet(np.concatenate([s.features for s in sets]), np.concatenate([s.mask for s in sets]),
                           np.concatenate([s.chosen for s in sets]), np.concatenate([s.actors for s in sets]),
                           np.concatenate([s.weights for s in sets]))


def choice_utilities(decisions: DecisionSet, beta: np.ndarray) -> np.ndarray:
    """``R x C`` utilities with infeasible moves at -inf."""
    util = decisions.features @ np.asarray(beta, dtype=float)
    return np.where(decisions.mask, util, -np.inf)


def choice_log_likelihood(decisions: DecisionSet, beta: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Weighted conditional-logit log-likelihood and its gradient.

    For each record the score is the chosen effect vector minus the
    probability-weighted mean effect vector.

    Returns:
        tuple: ``(value, gradient)``
    """
    beta = np.asarray(beta, dtype=float)
    if len(decisions) == 0:
        return 0.0, np.zeros_like(beta)
    util = choice_utilities(decisions, beta)
    log_norm = logsumexp(util, axis=1)
    rows = np.arange(len(decisions))
    chosen_util = util[rows, decisions.chosen]
    w = decisions.weights
    value = float(np.sum(w * (chosen_util - log_norm)))
    probs = softmax(util, axis=1)
    expected = np.einsum("rc,rck->rk", probs, decisions.features)
    score = decisions.features[rows, decisions.chosen] - expected
    return value, w @ score


def choice_log_probs(decisions: DecisionSet, beta: np.ndarray) -> np.ndarray:
    """Per-record ``ln P(chosen)``."""
    if len(decisions) == 0:
        return np.zeros(0)
    util = choice_utilities(decisions, beta)
    rows = np.arange(len(decisions))
    return util[rows, decisions.chosen] - logsumexp(util, axis=1)


@dataclass
class TrajectorySummary:
    """
    Everything the complete-data likelihood needs from one trajectory.

    Attributes:
        t_end: Window length
        network_counts: Network decisions per actor
        attribute_counts: Attribute decisions per actor (all attributes)
        network_exposure: Time each actor's network clock runs
        attribute_exposure: Summed running time of each actor's attribute clocks
        network: Network decision records
        attribute: Attribute decision records (columns span all attribute effects)
        impossible: Transitions no model move can produce
        weight: Sample weight applied to counts and exposures
    """

    t_end: float
    network_counts: np.ndarray
    attribute_counts: np.ndarray
    network_exposure: np.ndarray
    attribute_exposure: np.ndarray
    network: DecisionSet
    attribute: DecisionSet
    impossible: List[str] = field(default_factory=list)
    weight: float = 1.0

    def reweighted(self, weight: float) -> "TrajectorySummary":
        return TrajectorySummary(self.t_end, self.network_counts, self.attribute_counts, self.network_exposure,
                                 self.attribute_exposure, self.network.reweighted(weight),
                                 self.attribute.reweighted(weight), list(self.impossible), self.weight * weight)


def rate_log_likelihood(counts: np.ndarray, exposure: np.ndarray, rates: np.ndarray) -> Tuple[float, bool]:
    """``sum_i M_i ln(lambda_i) - lambda_i E_i``; flags counts observed at zero rate."""
    counts = np.asarray(counts, dtype=float)
    if np.any((counts > 0) & (rates <= 0)):
        return -np.inf, False
    with np.errstate(divide="ignore"):
        logs = np.where(counts > 0, np.log(np.where(rates > 0, rates, 1.0)), 0.0)
    return float(np.sum(counts * logs - rates * exposure)), True
