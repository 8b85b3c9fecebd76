"""Rating error and ranking quality metrics.

Sums use ``math.fsum`` so results do not depend on summation order.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple

import numpy as np


def mae(y_pred, y_true) -> float:
    """Mean absolute error over aligned prediction / truth arrays."""
    y_pred = np.asarray(y_pred, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pred.shape != y_true.shape:
        raise ValueError(f"shape mismatch: {y_pred.shape} vs {y_true.shape}")
    if y_true.size == 0:
        raise ValueError("no pairs to evaluate")
    return math.fsum(np.abs(y_pred - y_true).tolist()) / y_true.size


def relevance_labels(counts, coefficient: float = 0.7) -> np.ndarray:
    """Mark items whose count reaches ``coefficient`` times the user's maximum."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size == 0:
        raise ValueError("empty holdout")
    if not 0 < coefficient <= 1:
        raise ValueError("coefficient must lie in (0, 1]")
    top = counts.max()
    if top <= 0:
        raise ValueError("all counts are zero; relevance is undefined")
    return counts >= coefficient * top


def rank_order(scores, items) -> np.ndarray:
    """Indices sorting by descending score, ties by ascending item index."""
    return np.lexsort((np.asarray(items), -np.asarray(scores, dtype=np.float64)))


def average_precision(ranked_relevance) -> float:
    rel = np.asarray(ranked_relevance, dtype=bool)
    hits = rel.sum()
    if hits == 0:
        raise ValueError("no relevant items")
    precision_at = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return math.fsum(precision_at[rel].tolist()) / int(hits)


class MapResult(NamedTuple):
    value: float
    n_users: int
    n_skipped: int


def mean_average_precision(rankings: Iterable) -> MapResult:
    """Mean of per-user average precision.

    ``rankings`` yields one boolean relevance array per user, already in
    ranked order. Users without any relevant item are skipped and counted.
    """
    aps, skipped = [], 0
    for rel in rankings:
        rel = np.asarray(rel, dtype=bool)
        if not rel.any():
            skipped += 1
            continue
        aps.append(average_precision(rel))
    if not aps:
        raise ValueError("no user has a relevant item")
    return MapResult(math.fsum(aps) / len(aps), len(aps), skipped)


def grouped_map(users, items, scores, counts, coefficient: float = 0.7) -> MapResult:
    """MAP over flat holdout arrays, ranking each user's own holdout items."""
    users = np.asarray(users)
    items = np.asarray(items)
    scores = np.asarray(scores, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)

    order = np.argsort(users, kind="stable")
    _, starts = np.unique(users[order], return_index=True)

    def per_user():
        for sel in np.split(order, starts[1:]):
            try:
                rel = relevance_labels(counts[sel], coefficient)
            except ValueError:
                yield np.zeros(0, dtype=bool)
                continue
            yield rel[rank_order(scores[sel], items[sel])]

    return mean_average_precision(per_user())
