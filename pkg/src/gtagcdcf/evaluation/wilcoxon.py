"""Wilcoxon signed-rank test for paired samples."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_N = 25
MIN_N = 5


class WilcoxonResult(NamedTuple):
    statistic: float
    """Sum of the ranks of positive differences ``a - b``."""
    pvalue: float
    n: int
    exact: bool


def signed_rank_null(ranks) -> tuple[np.ndarray, np.ndarray]:
    """Exact null distribution of the positive rank sum.

    Under the null each rank enters the sum with probability 1/2,
    independently. Ranks may be midranks; they are doubled so every sum is
    an integer. Returns ``(support, probabilities)`` with the support in
    original (undoubled) units.
    """
    doubled = np.rint(2 * np.asarray(ranks, dtype=np.float64)).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[:total + 1 - r]
    counts /= 2.0 ** len(doubled)
    return np.arange(total + 1) / 2.0, counts


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided test that the paired differences ``a - b`` are symmetric about 0.

    Zero differences are dropped. Up to 25 remaining pairs the exact
    permutation distribution is used (midranks for ties); beyond that, the
    normal approximation with tie-corrected variance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be paired 1-d arrays of equal length")
    diff = a - b
    diff = diff[diff != 0]
    n = diff.size
    if n < MIN_N:
        raise ValueError(f"need at least {MIN_N} nonzero differences, got {n}")
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())

    if n <= EXACT_MAX_N:
        support, prob = signed_rank_null(ranks)
        lower = prob[support <= w_plus + 1e-9].sum()
        upper = prob[support >= w_plus - 1e-9].sum()
        p = min(1.0, 2.0 * min(lower, upper))
        return WilcoxonResult(w_plus, float(p), n, True)

    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(diff), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts ** 3 - tie_counts).sum()) / 48.0
    z = (w_plus - mean) / math.sqrt(var)
    return WilcoxonResult(w_plus, math.erfc(abs(z) / math.sqrt(2.0)), n, False)
