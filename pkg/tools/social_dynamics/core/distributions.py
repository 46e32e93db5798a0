"""
Holding-time distributions and random streams.

All samplers invert a CDF so that the uniform draw fully determines the
result; the quantile functions are exposed for exact tests.
"""

from typing import List, Optional, Union

import numpy as np

from ..exceptions import InvalidRateError

ArrayLike = Union[float, np.ndarray]


def make_rng(seed: Optional[Union[int, np.random.SeedSequence]] = None) -> np.random.Generator:
    """Seedable generator used by every sampling routine."""
    return np.random.default_rng(seed)


def spawn_streams(seed: Union[int, np.random.SeedSequence], count: int) -> List[np.random.Generator]:
    """
    Split a seed into ``count`` independent generators.

    Sample index k always maps to stream k, so batches are reproducible no
    matter how the work is scheduled.

    Args:
        seed: Root seed or seed sequence
        count: Number of streams

    Returns:
        list: Independent ``numpy.random.Generator`` objects
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in root.spawn(count)]


def log1mexp(x: ArrayLike) -> ArrayLike:
    """
    Stable ``log(1 - exp(-x))`` for ``x >= 0``.

    Returns -inf at x == 0.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(x > np.log(2.0), np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))
    return out if out.ndim else float(out)


def exponential_quantile(q: ArrayLike, u: ArrayLike) -> ArrayLike:
    """Inverse of the CDF ``1 - exp(-q t)``; infinite where q == 0."""
    q = np.asarray(q, dtype=float)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(q > 0, -np.log1p(-u) / np.where(q > 0, q, 1.0), np.inf)
    return out if out.ndim else float(out)


def truncated_exponential_quantile(q: ArrayLike, horizon: ArrayLike, u: ArrayLike) -> ArrayLike:
    """
    Inverse CDF of the exponential truncated to ``[0, horizon)``.

    The density is ``q exp(-q t) / (1 - exp(-q horizon))``.
    """
    q = np.asarray(q, dtype=float)
    horizon = np.asarray(horizon, dtype=float)
    u = np.asarray(u, dtype=float)
    safe_q = np.where(q > 0, q, 1.0)
    mass = -np.expm1(-safe_q * horizon)
    out = -np.log1p(-u * mass) / safe_q
    # results must stay strictly inside the window
    out = np.minimum(out, np.nextafter(horizon, 0.0))
    out = np.where(q > 0, out, np.nan)
    return out if out.ndim else float(out)


def sample_exponential(q: float, rng: np.random.Generator) -> float:
    """
    Draw a holding time with density ``q exp(-q t)``.

    Args:
        q: Rate, strictly positive
        rng: Random stream

    Returns:
        float: Duration >= 0

    Raises:
        InvalidRateError: If q <= 0
    """
    if not q > 0:
        raise InvalidRateError(f"exponential rate must be positive, got {q}")
    return exponential_quantile(q, rng.random())


def sample_truncated_exponential(q: float, horizon: float, rng: np.random.Generator) -> float:
    """
    Draw a holding time conditioned to fall before ``horizon``.

    Args:
        q: Rate, strictly positive
        horizon: Window length, strictly positive
        rng: Random stream

    Returns:
        float: Duration in [0, horizon)

    Raises:
        InvalidRateError: If q or horizon is not positive
    """
    if not q > 0:
        raise InvalidRateError(f"truncated exponential rate must be positive, got {q}")
    if not horizon > 0:
        raise InvalidRateError(f"truncation horizon must be positive, got {horizon}")
    return truncated_exponential_quantile(q, horizon, rng.random())


def truncated_exponential_cdf(q: float, horizon: float, t: ArrayLike) -> ArrayLike:
    t = np.clip(np.asarray(t, dtype=float), 0.0, horizon)
    out = np.expm1(-q * t) / np.expm1(-q * horizon)
    return out if out.ndim else float(out)
