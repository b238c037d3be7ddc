"""Percentile bootstrap driven by a dedicated deterministic stream."""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

from lerw.walk import RngStream, derive_stream

BOOTSTRAP_STREAM = 2**62  # default stream index, outside every replica namespace

_NAMED: dict[str, Callable[[np.ndarray], float]] = {
    "mean": np.mean,
    "median": np.median,
    "std": lambda x: np.std(x, ddof=1),
    "var": lambda x: np.var(x, ddof=1),
}

Statistic = Union[str, Callable[[np.ndarray], float]]


def _resolve(statistic: Statistic) -> Callable[[np.ndarray], float]:
    if callable(statistic):
        return statistic
    try:
        return _NAMED[statistic]
    except KeyError:
        raise ValueError(f"unknown statistic {statistic!r}; use one of {sorted(_NAMED)} or a callable") from None


def bootstrap_distribution(samples, statistic: Statistic = "mean", B: int = 1000, rng: RngStream | None = None) -> np.ndarray:
    x = np.asarray(samples)
    if x.shape[0] == 0:
        raise ValueError("cannot bootstrap an empty sample")
    if B < 100:
        raise ValueError(f"B must be >= 100, got {B}")
    stat = _resolve(statistic)
    gen = (rng or derive_stream(0, BOOTSTRAP_STREAM)).generator
    n = x.shape[0]
    return np.array([stat(x[gen.integers(0, n, size=n)]) for _ in range(B)], dtype=float)


def bootstrap_ci(
    samples,
    statistic: Statistic = "mean",
    B: int = 1000,
    level: float = 0.95,
    rng: RngStream | None = None,
) -> tuple[float, float]:
    """Percentile interval of ``statistic`` over ``B`` resamples."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    dist = bootstrap_distribution(samples, statistic, B, rng)
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(dist, [tail, 1.0 - tail])
    return float(lo), float(hi)
