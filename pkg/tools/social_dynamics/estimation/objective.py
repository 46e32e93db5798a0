"""
Expected complete-data log-likelihood over a weighted set of trajectories.

The rates and the effect weights separate: rates only see decision counts
and clock exposures, weights only see the decision records. Because every
clock always fires into a real move, the total exit rate does not depend on
the weights, so the survival term drops out of the weight gradient.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ..model.decisions import DecisionSet, TrajectorySummary, choice_log_likelihood, rate_log_likelihood
from ..model.params import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_RATE_FLOOR = 1e-3
DEFAULT_GTOL = 1e-5


@dataclass
class ExpectedStatistics:
    """
    Weighted pool of trajectory summaries.

    Attributes:
        network_counts: Expected network decisions per actor
        attribute_counts: Expected attribute decisions per actor
        network_exposure: Expected network clock time per actor
        attribute_exposure: Expected attribute clock time per actor
        network: Network decision records with sample weights
        attribute: Attribute decision records with sample weights
        total_weight: Sum of the sample weights
    """

    network_counts: np.ndarray
    attribute_counts: np.ndarray
    network_exposure: np.ndarray
    attribute_exposure: np.ndarray
    network: DecisionSet
    attribute: DecisionSet
    total_weight: float

    @classmethod
    def pool(cls, summaries: Sequence[TrajectorySummary], weights: Optional[Sequence[float]] = None) -> "ExpectedStatistics":
        """
        Combine summaries with the given weights (equal weights when omitted).
        """
        if not summaries:
            raise ValueError("cannot pool an empty set of summaries")
        w = np.full(len(summaries), 1.0 / len(summaries)) if weights is None else np.asarray(weights, dtype=float)
        keep = [k for k in range(len(summaries)) if w[k] > 0]
        if not keep:
            raise ValueError("every summary has zero weight")
        parts = [summaries[k].reweighted(w[k]) for k in keep]
        return cls(
            network_counts=sum(w[k] * summaries[k].network_counts for k in keep),
            attribute_counts=sum(w[k] * summaries[k].attribute_counts for k in keep),
            network_exposure=sum(w[k] * summaries[k].network_exposure for k in keep),
            attribute_exposure=sum(w[k] * summaries[k].attribute_exposure for k in keep),
            network=DecisionSet.concatenate([p.network for p in parts]),
            attribute=DecisionSet.concatenate([p.attribute for p in parts]),
            total_weight=float(w[keep].sum()),
        )


def expected_complete_loglik_and_grad(beta: np.ndarray, stats: ExpectedStatistics,
                                      n_network_effects: int) -> Tuple[float, np.ndarray]:
    """
    Weight part of the expected complete-data log-likelihood and its gradient.

    Args:
        beta: Network weights followed by attribute weights
        stats: Weighted statistics of the sample set
        n_network_effects: Length of the network block of ``beta``

    Returns:
        tuple: ``(value, gradient)`` with the gradient in ``beta``'s layout
    """
    beta = np.asarray(beta, dtype=float)
    net_value, net_grad = choice_log_likelihood(stats.network, beta[:n_network_effects])
    att_value, att_grad = choice_log_likelihood(stats.attribute, beta[n_network_effects:])
    return net_value + att_value, np.concatenate([net_grad, att_grad])


def expected_complete_loglik(params: ModelParams, stats: ExpectedStatistics) -> float:
    """Full expected log-likelihood (rates and weights) of one parameter value."""
    rate_n, _ = rate_log_likelihood(stats.network_counts, stats.network_exposure, params.network_rate)
    rate_a, _ = rate_log_likelihood(stats.attribute_counts, stats.attribute_exposure, params.attribute_rate)
    beta = np.concatenate([params.network_weights, params.attribute_weights])
    value, _ = expected_complete_loglik_and_grad(beta, stats, params.network_weights.size)
    return float(rate_n + rate_a + value)


def rate_mle(counts: np.ndarray, exposure: np.ndarray, shared: bool, floor: float = 0.0) -> np.ndarray:
    """
    Closed-form rate update ``counts / exposure``, pooled over actors when shared.

    Actors without exposure keep rate ``floor``.
    """
    counts = np.asarray(counts, dtype=float)
    exposure = np.asarray(exposure, dtype=float)
    if shared:
        total = exposure.sum()
        value = counts.sum() / total if total > 0 else 0.0
        rates = np.full(counts.shape, value)
    else:
        rates = np.divide(counts, exposure, out=np.zeros_like(counts), where=exposure > 0)
    return np.maximum(rates, floor)


def rate_step(params: ModelParams, stats: ExpectedStatistics, shared: bool, floor: float) -> ModelParams:
    network = rate_mle(stats.network_counts, stats.network_exposure, shared, floor)
    if np.any(stats.attribute_exposure > 0):
        attribute = rate_mle(stats.attribute_counts, stats.attribute_exposure, shared, floor)
    else:
        attribute = params.attribute_rate
    return params.copy(network_rate=network, attribute_rate=attribute)


@dataclass
class WeightStep:
    beta: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    aborted: bool = False
    message: str = ""


def maximize_weights(stats: ExpectedStatistics, beta0: np.ndarray, n_network_effects: int,
                     gtol: float = DEFAULT_GTOL, maxiter: Optional[int] = None) -> WeightStep:
    """
    Conjugate-gradient ascent on the weight objective for a fixed sample set.

    A non-finite value or gradient aborts the search and keeps ``beta0``.
    """
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.size == 0:
        return WeightStep(beta0, 0.0, 0.0, 0)
    start_value, start_grad = expected_complete_loglik_and_grad(beta0, stats, n_network_effects)
    bad = {"seen": False}

    def negated(beta):
        value, grad = expected_complete_loglik_and_grad(beta, stats, n_network_effects)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            bad["seen"] = True
            return np.inf, np.zeros_like(beta)
        return -value, -grad

    scale = 1.0 + abs(start_value)
    result = optimize.minimize(negated, beta0, jac=True, method="CG",
                               options={"gtol": gtol * scale, "maxiter": maxiter or 50 * beta0.size})
    if bad["seen"] and not np.isfinite(result.fun):
        logger.warning("Non-finite weight gradient; keeping previous weights")
        return WeightStep(beta0, start_value, float(np.linalg.norm(start_grad)), int(result.nit), True,
                          "non-finite gradient")
    value, grad = expected_complete_loglik_and_grad(result.x, stats, n_network_effects)
    return WeightStep(np.asarray(result.x), value, float(np.linalg.norm(grad)), int(result.nit), False,
                      str(result.message))


def weight_step(params: ModelParams, stats: ExpectedStatistics, gtol: float = DEFAULT_GTOL) -> Tuple[ModelParams, WeightStep]:
    """
    Weight M-step with a monotonicity guard.

    If the objective went down, the step is halved once; if that still does
    not help, the previous weights are kept.
    """
    k = params.network_weights.size
    beta0 = np.concatenate([params.network_weights, params.attribute_weights])
    before, _ = expected_complete_loglik_and_grad(beta0, stats, k)
    step = maximize_weights(stats, beta0, k, gtol)
    beta = step.beta
    if step.value < before:
        beta = beta0 + 0.5 * (step.beta - beta0)
        halved, grad = expected_complete_loglik_and_grad(beta, stats, k)
        if not halved >= before:
            beta = beta0
            halved, grad = before, np.zeros_like(beta0)
        logger.debug("Weight step decreased the objective; halved step gives %.6g", halved)
        step = WeightStep(beta, halved, float(np.linalg.norm(grad)), step.iterations, step.aborted, "halved")
    return params.copy(network_weights=beta[:k], attribute_weights=beta[k:]), step
