"""Batch-means helpers shared by the estimators."""
from __future__ import annotations

import numpy as np

MIN_BATCHES = 16


def batch_slices(batch, min_batches: int = MIN_BATCHES):
    """Index slices used for batch means.

    One batch per chain when there are enough chains; otherwise contiguous
    splits of the (walker-major) sample order.
    """
    slices = batch.chain_slices()
    if len(slices) >= min_batches:
        return slices
    edges = np.linspace(0, batch.m, min(min_batches, batch.m) + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def batch_se(per_batch: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Standard error of a mean from per-batch estimates."""
    per_batch = np.asarray(per_batch, dtype=float)
    B = len(per_batch)
    if B < 2:
        return 0.0
    if weights is None:
        return float(np.std(per_batch, ddof=1) / np.sqrt(B))
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    mean = np.sum(weights * per_batch)
    # weighted batch means, effective batch count from the weights
    var = np.sum(weights * (per_batch - mean) ** 2) * B / (B - 1)
    return float(np.sqrt(var * np.sum(weights**2)))


def mean_and_se(values: np.ndarray, slices) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    per = np.array([values[s].mean() for s in slices])
    sizes = np.array([s.stop - s.start for s in slices], dtype=float)
    return float(values.mean()), batch_se(per, sizes)
