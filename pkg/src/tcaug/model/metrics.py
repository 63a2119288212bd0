"""Classification metrics: per-class P/R/F1, weighted F1, group breakdowns.

All scores are returned in percent.
"""

from __future__ import annotations

import numpy as np


def per_class_metrics(y_true, y_pred, classes=None) -> dict:
    """``{class: {"precision", "recall", "f1", "support"}}``.

    ``classes`` defaults to the sorted union of labels seen in either array.
    A zero denominator yields 0 for the affected score.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    if y_true.size == 0:
        raise ValueError("metrics of an empty prediction set")
    if classes is None:
        classes = sorted(set(y_true.tolist()) | set(y_pred.tolist()))
    out = {}
    for c in classes:
        tp = int(np.sum((y_true == c) & (y_pred == c)))
        fp = int(np.sum((y_true != c) & (y_pred == c)))
        fn = int(np.sum((y_true == c) & (y_pred != c)))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        out[c] = {"precision": 100.0 * p, "recall": 100.0 * r, "f1": 100.0 * f1, "support": tp + fn}
    return out


def weighted_f1(y_true, y_pred) -> float:
    """Support-weighted mean of per-class F1, in ``[0, 100]``."""
    pc = per_class_metrics(y_true, y_pred)
    n = sum(m["support"] for m in pc.values())
    return sum(m["support"] * m["f1"] for m in pc.values()) / n


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    return 100.0 * float(np.mean(y_true == np.asarray(y_pred))) if y_true.size else 0.0


def _group(per_class: dict, members) -> dict:
    members = [c for c in per_class if c in members]
    if not members:
        raise ValueError("empty class group")
    n = sum(per_class[c]["support"] for c in members)
    if n == 0:
        raise ValueError("class group has no support")
    avg = lambda key: sum(per_class[c]["support"] * per_class[c][key] for c in members) / n  # noqa: E731
    return {"precision": avg("precision"), "recall": avg("recall"), "weighted_f1": avg("f1"), "support": n}


def group_metrics(per_class: dict, majority_set) -> dict:
    """Support-weighted precision, recall and F1 within majority and minority classes."""
    majority = set(majority_set)
    unknown = majority - set(per_class)
    if unknown:
        raise ValueError(f"majority classes not in per_class: {sorted(unknown)}")
    minority = set(per_class) - majority
    return {"majority": _group(per_class, majority), "minority": _group(per_class, minority)}


def split_majority(counts: dict, n_majority: int | None = None) -> set:
    """Classes above the median training count (or the ``n_majority`` largest)."""
    ordered = sorted(counts, key=lambda c: (-counts[c], c))
    if n_majority is None:
        med = float(np.median(list(counts.values())))
        return {c for c in ordered if counts[c] > med}
    return set(ordered[:n_majority])
