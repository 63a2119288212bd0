"""Mean ranks across runs and the Nemenyi critical distance.

Within each run methods are ranked 1 (best, highest score) to ``k``; tied
methods share the average of the ranks they span. Two methods are considered
equivalent when their mean ranks differ by less than

    CD = q_alpha * sqrt(k (k + 1) / (6 N))

where ``q_alpha`` is the Studentized range quantile (infinite degrees of
freedom) divided by sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

# alpha = 0.05, k = 2..20
Q_TABLE_005 = {
    2: 1.960, 3: 2.343, 4: 2.569, 5: 2.728, 6: 2.850, 7: 2.949, 8: 3.031, 9: 3.102, 10: 3.164,
    11: 3.219, 12: 3.268, 13: 3.313, 14: 3.354, 15: 3.391, 16: 3.426, 17: 3.458, 18: 3.489,
    19: 3.517, 20: 3.544,
}  # fmt: skip


def rank_scores(scores) -> np.ndarray:
    """Per-run ranks of a ``(runs, methods)`` score matrix, 1 = highest score."""
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[None, :]
    if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 2:
        raise ValueError(f"need a (runs >= 1, methods >= 2) score matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return rankdata(-s, method="average", axis=1)


def mean_ranks(scores) -> np.ndarray:
    return rank_scores(scores).mean(axis=0)


def q_alpha(k: int, alpha: float = 0.05) -> float:
    if not math.isclose(alpha, 0.05):
        raise ValueError(f"only alpha=0.05 is tabulated, got {alpha}")
    if k not in Q_TABLE_005:
        raise ValueError(f"k={k} outside the tabulated range 2..20")
    return Q_TABLE_005[k]


def nemenyi_cd(k: int, n: int, alpha: float = 0.05) -> float:
    if n < 1:
        raise ValueError("need at least one run")
    return q_alpha(k, alpha) * math.sqrt(k * (k + 1) / (6.0 * n))


@dataclass
class RankingReport:
    methods: list
    mean_rank: dict
    cd: float
    n_runs: int
    n_methods: int
    equivalent: np.ndarray = field(repr=False)

    def equivalent_pairs(self) -> list[tuple[str, str]]:
        """Unordered pairs ``(a, b)``, ``a`` before ``b`` in ``methods``, within CD."""
        m = self.methods
        return [(m[i], m[j]) for i in range(len(m)) for j in range(i + 1, len(m)) if self.equivalent[i, j]]

    def ordered(self) -> list[tuple[str, float]]:
        """Methods from best to worst mean rank (name breaks ties)."""
        return sorted(self.mean_rank.items(), key=lambda kv: (kv[1], kv[0]))

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "mean_rank": {k: float(v) for k, v in self.mean_rank.items()},
            "cd": float(self.cd),
            "n_runs": int(self.n_runs),
            "n_methods": int(self.n_methods),
            "equivalent_pairs": [list(p) for p in self.equivalent_pairs()],
        }


def ranking_report(scores, methods, alpha: float = 0.05) -> RankingReport:
    """Rank ``methods`` (columns of ``scores``) and group them by critical distance."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] != len(methods):
        raise ValueError("scores must be (runs, len(methods))")
    mr = mean_ranks(scores)
    k, n = scores.shape[1], scores.shape[0]
    cd = nemenyi_cd(k, n, alpha)
    eq = np.abs(mr[:, None] - mr[None, :]) < cd
    return RankingReport(list(methods), dict(zip(methods, mr.tolist())), cd, n, k, eq)
