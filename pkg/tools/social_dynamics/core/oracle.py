"""
Exact reference computations for small systems.

The joint process over a handful of variables is flattened into a single
generator; transition kernels come from uniformization, and hidden-state
posteriors from a forward-backward pass over a sub-generator. These are test
oracles: cost grows exponentially with the number of variables.
"""

import itertools
import logging
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import stats

from ..exceptions import StateSpaceTooLargeError
from .intensity import IntensityMatrix
from .variables import VariableId

logger = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 4096
POISSON_TAIL = 1e-12
# above this uniformized horizon the kernel is built by squaring
MAX_UNIFORMIZED_MEAN = 50.0


class FactoredModel(Protocol):
    """What the oracle needs from a model."""

    def state_values(self, variable: VariableId) -> Sequence[int]:
        ...

    def intensity(self, state: Mapping[VariableId, int], variable: VariableId, new_value: int) -> float:
        ...


def joint_states(model: FactoredModel, variables: Sequence[VariableId],
                 cap: int = DEFAULT_STATE_CAP) -> List[Tuple[int, ...]]:
    """
    Enumerate joint assignments of ``variables`` in lexicographic order.

    Raises:
        StateSpaceTooLargeError: If the product of the ranges exceeds ``cap``
    """
    ranges = [list(model.state_values(v)) for v in variables]
    size = int(np.prod([len(r) for r in ranges], dtype=float)) if ranges else 1
    if size > cap:
        raise StateSpaceTooLargeError(f"joint state space of {size} states exceeds cap {cap}")
    return list(itertools.product(*ranges))


def build_joint_generator(model: FactoredModel, variables: Sequence[VariableId],
                          base_state: Optional[Mapping[VariableId, int]] = None,
                          cap: int = DEFAULT_STATE_CAP) -> IntensityMatrix:
    """
    Amalgamate the model's local intensities over a variable subset.

    Variables outside the subset are held at ``base_state``. Only
    single-variable changes get a nonzero rate.

    Args:
        model: Factored model
        variables: Variables spanning the joint space, in state-tuple order
        base_state: Values of the remaining variables
        cap: Maximum number of joint states

    Returns:
        IntensityMatrix: Generator indexed like ``joint_states(model, variables)``
    """
    variables = list(variables)
    states = joint_states(model, variables, cap)
    index = {s: k for k, s in enumerate(states)}
    rates = np.zeros((len(states), len(states)))
    base = dict(base_state or {})
    for k, s in enumerate(states):
        full = dict(base)
        full.update(zip(variables, s))
        for pos, v in enumerate(variables):
            for value in model.state_values(v):
                if value == s[pos]:
                    continue
                target = s[:pos] + (value,) + s[pos + 1:]
                rates[k, index[target]] = model.intensity(full, v, value)
    logger.debug("Built joint generator over %d variables (%d states)", len(variables), len(states))
    return IntensityMatrix.from_rates(rates)


def _uniformized_exp(q: np.ndarray, t: float) -> np.ndarray:
    """exp(tQ) for a generator or sub-generator (rows summing to <= 0)."""
    n = q.shape[0]
    if t == 0.0:
        return np.eye(n)
    rate = float(np.max(-np.diag(q)))
    if rate == 0.0:
        return np.eye(n)
    squarings = 0
    while rate * t / 2.0 ** squarings > MAX_UNIFORMIZED_MEAN:
        squarings += 1
    step = t / 2.0 ** squarings
    mean = rate * step
    jump = np.eye(n) + q / rate
    k_max = int(stats.poisson.ppf(1.0 - POISSON_TAIL, mean)) + 1
    weights = stats.poisson.pmf(np.arange(k_max + 1), mean)
    out = weights[0] * np.eye(n)
    power = np.eye(n)
    for k in range(1, k_max + 1):
        power = power @ jump
        out += weights[k] * power
    for _ in range(squarings):
        out = out @ out
    return out


def exact_transition_kernel(generator: IntensityMatrix, t: float) -> np.ndarray:
    """
    Transition probabilities ``exp(tQ)`` by uniformization.

    The Poisson series is cut once the remaining tail mass falls below 1e-12;
    long horizons are split and the kernel squared back up.

    Args:
        generator: Valid generator
        t: Duration, >= 0

    Returns:
        np.ndarray: Row-stochastic matrix
    """
    if t < 0:
        raise ValueError(f"kernel duration must be non-negative, got {t}")
    kernel = _uniformized_exp(generator.q, float(t))
    np.clip(kernel, 0.0, None, out=kernel)
    return kernel / kernel.sum(axis=1, keepdims=True)


def smoothed_state_marginals(generator: IntensityMatrix, prior: np.ndarray, leak: np.ndarray,
                             events: Sequence[Tuple[float, np.ndarray]], t_end: float,
                             grid: Sequence[float]) -> np.ndarray:
    """
    Posterior joint-state distributions of a chain observed through point events.

    Events arrive with state-dependent rates; ``leak[s]`` is the total event
    rate in state ``s`` and each event carries the vector of rates of its own
    stream. Between events the chain evolves under ``Q - diag(leak)``.

    Args:
        generator: Latent chain generator
        prior: Initial distribution over joint states
        leak: Total event rate per joint state
        events: ``(time, rate_per_state)`` pairs
        t_end: End of the window
        grid: Query times in ``[0, t_end]``

    Returns:
        np.ndarray: ``len(grid) x n_states`` posterior probabilities
    """
    sub = generator.q - np.diag(np.asarray(leak, dtype=float))
    # events before grid points at equal times: the forward pass includes them
    points = sorted([(float(t), 0, k) for k, (t, _) in enumerate(events)]
                    + [(float(t), 1, k) for k, t in enumerate(grid)])
    forward: Dict[int, np.ndarray] = {}
    a = np.asarray(prior, dtype=float).copy()
    t_prev = 0.0
    for t, kind, k in points:
        a = a @ _uniformized_exp(sub, t - t_prev)
        if kind == 0:
            a = a * events[k][1]
        a /= a.sum()
        if kind == 1:
            forward[k] = a.copy()
        t_prev = t

    backward: Dict[int, np.ndarray] = {}
    b = np.ones_like(a)
    t_next = float(t_end)
    for t, kind, k in reversed(points):
        b = _uniformized_exp(sub, t_next - t) @ b
        if kind == 1:
            backward[k] = b.copy()
        else:
            b = events[k][1] * b
        b /= b.sum()
        t_next = t

    out = np.zeros((len(grid), len(a)))
    for k in range(len(grid)):
        joint = forward[k] * backward[k]
        out[k] = joint / joint.sum()
    return out
