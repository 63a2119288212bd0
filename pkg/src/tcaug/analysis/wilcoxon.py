"""Two-sided Wilcoxon signed-rank test for paired samples.

Zero differences are discarded. Absolute differences are ranked with ties
averaged. Up to 25 pairs the null distribution of ``W+`` is enumerated
exactly: ranks are doubled so that half-integer tie ranks become integers,
and a subset-sum count gives the number of sign patterns reaching each
total. Above 25 pairs a normal approximation with tie-corrected variance is
used (no continuity correction).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_N = 25
MIN_N = 5


def _exact_counts(doubled: np.ndarray) -> np.ndarray:
    """``counts[s]`` = number of sign patterns whose doubled positive rank sum is ``s``."""
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[: len(counts) - r]
    return counts


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> dict:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d arrays of equal length")
    d = a - b
    if not np.all(np.isfinite(d)):
        raise ValueError("paired samples must be finite")
    d = d[d != 0]
    if d.size == 0:
        raise ValueError("degenerate: all paired differences are zero")
    n = d.size
    if n < MIN_N:
        raise ValueError(f"need at least {MIN_N} non-zero differences, got {n}")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _exact_counts(doubled)
        total = counts.sum()
        s = int(round(2 * w_plus))
        lower = counts[: s + 1].sum() / total
        upper = counts[s:].sum() / total
        p = min(1.0, 2.0 * min(lower, upper))
        method = "exact"
    else:
        _, t = np.unique(ranks, return_counts=True)
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(t**3 - t)) / 48.0
        z = (w_plus - mean) / math.sqrt(var)
        p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
        method = "normal"
    return {
        "statistic": min(w_plus, w_minus),
        "w_plus": w_plus,
        "w_minus": w_minus,
        "n": n,
        "p_value": p,
        "reject": p < alpha,
        "method": method,
    }
