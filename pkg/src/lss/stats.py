"""Small statistical helpers shared by the experiment drivers."""

from __future__ import annotations

import numpy as np

__all__ = ["mean_se", "pava_decreasing", "ols_line", "binomial_se"]


def mean_se(values) -> tuple[float, float]:
    """Sample mean and its standard error (0 for a single observation)."""
    arr = np.asarray(values, dtype=float)
    m = float(arr.mean())
    if arr.size < 2:
        return m, 0.0
    return m, float(arr.std(ddof=1) / np.sqrt(arr.size))


def pava_decreasing(y) -> np.ndarray:
    """Best nonincreasing fit in least squares (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    # fit increasing to the reversed series, then reverse back
    vals = list(y[::-1])
    blocks = [[v, 1.0] for v in vals]  # [mean, weight]
    merged: list[list[float]] = []
    for blk in blocks:
        merged.append(blk)
        while len(merged) > 1 and merged[-2][0] > merged[-1][0]:
            b2 = merged.pop()
            b1 = merged.pop()
            w = b1[1] + b2[1]
            merged.append([(b1[0] * b1[1] + b2[0] * b2[1]) / w, w])
    out = np.concatenate([np.full(int(w), v) for v, w in merged])
    return out[::-1]


def ols_line(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    slope = float((dx * (y - ym)).sum() / (dx * dx).sum())
    return slope, float(ym - slope * xm)


def binomial_se(p: float, m: int) -> float:
    """Standard error of an empirical frequency with success probability p."""
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / max(m, 1)))
