"""Latent-space geometry: nearest anchors, pair-distance densities, 2-D projections."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODES = ("all", "aug_only")


def _unit_rows(z, what):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"{what} must be a 2-d array")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError(f"{what} contains a zero-norm latent; cosine similarity undefined")
    return z / norms


@dataclass
class AnchorStats:
    mode: str
    k: int
    matched: np.ndarray = field(repr=False)
    mean_similarity: np.ndarray = field(repr=False)
    distance_ratio: np.ndarray = field(repr=False)

    @property
    def mean_matched(self) -> float:
        return float(self.matched.mean())

    @property
    def mean_cosine(self) -> float:
        return float(self.mean_similarity.mean())

    @property
    def mean_distance_ratio(self) -> float:
        return float(np.nanmean(self.distance_ratio)) if np.any(np.isfinite(self.distance_ratio)) else float("nan")

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "k": self.k,
            "mean_matched": self.mean_matched,
            "mean_cosine": self.mean_cosine,
            "mean_distance_ratio": self.mean_distance_ratio,
            "n_test": int(self.matched.size),
        }


def _nearest_distance(sim, anchor_labels, test_labels):
    """Smallest cosine distance from each test row to an anchor of the same label."""
    same = anchor_labels[None, :] == test_labels[:, None]
    best = np.where(same, sim, -np.inf).max(axis=1)
    return np.where(np.isfinite(best), 1.0 - best, np.nan)


def knn_anchor_stats(
    train_latents, train_labels, aug_latents, aug_labels, test_latents, test_labels, mode="all", k=10
) -> AnchorStats:
    """Label agreement and similarity of each test sample's ``k`` nearest anchors.

    Anchors are the training latents together with the augmented ones
    (``mode="all"``) or the augmented latents alone (``mode="aug_only"``).
    Neighbors are ranked by cosine similarity; equal similarities keep anchor
    order. The distance ratio compares, for each test sample, the nearest
    augmented anchor and the nearest original anchor of the test label, using
    the cosine distance ``1 - similarity``. A zero denominator gives 1 when the
    numerator is also zero and ``inf`` otherwise.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    tr = _unit_rows(train_latents, "train_latents")
    au = _unit_rows(aug_latents, "aug_latents")
    te = _unit_rows(test_latents, "test_latents")
    if not tr.shape[1] == au.shape[1] == te.shape[1]:
        raise ValueError("latent dimensions differ")
    tr_y, au_y, te_y = (np.asarray(v) for v in (train_labels, aug_labels, test_labels))
    if len(tr_y) != len(tr) or len(au_y) != len(au) or len(te_y) != len(te):
        raise ValueError("labels and latents have different lengths")

    sim_tr = np.clip(te @ tr.T, -1.0, 1.0)
    sim_au = np.clip(te @ au.T, -1.0, 1.0)
    if mode == "all":
        sim, pool_y = np.concatenate([sim_tr, sim_au], axis=1), np.concatenate([tr_y, au_y])
    else:
        sim, pool_y = sim_au, au_y
    if not 1 <= k <= sim.shape[1]:
        raise ValueError(f"k={k} must be in [1, {sim.shape[1]}] anchors")
    nn = np.argsort(-sim, axis=1, kind="stable")[:, :k]
    top = np.take_along_axis(sim, nn, axis=1)
    matched = (pool_y[nn] == te_y[:, None]).sum(axis=1)

    d_aug = _nearest_distance(sim_au, au_y, te_y)
    d_orig = _nearest_distance(sim_tr, tr_y, te_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d_orig > 0, d_aug / d_orig, np.where(d_aug == 0, 1.0, np.inf))
    ratio[np.isnan(d_aug) | np.isnan(d_orig)] = np.nan
    return AnchorStats(mode, k, matched, top.mean(axis=1), ratio)


def silverman_bandwidth(x) -> float:
    """``0.9 min(std, IQR / 1.34) n^(-1/5)``, falling back to whichever spread is positive.

    Identical samples have no spread at all; they get ``1e-3 * max(1, |x|)``
    so that the density stays a narrow bump at the common value.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = [s for s in (sd, (q75 - q25) / 1.34) if s > 0]
    if not spread:
        return 1e-3 * max(1.0, float(np.abs(x).max()))
    return 0.9 * min(spread) * n ** (-0.2)


def gaussian_kde_1d(samples, grid, bandwidth) -> np.ndarray:
    u = (np.asarray(grid, dtype=np.float64)[:, None] - np.asarray(samples, dtype=np.float64)[None, :]) / bandwidth
    return np.exp(-0.5 * u * u).sum(axis=1) / (len(samples) * bandwidth * np.sqrt(2 * np.pi))


def pair_distances(orig_latents, aug_latents) -> np.ndarray:
    o = np.asarray(orig_latents, dtype=np.float64)
    a = np.asarray(aug_latents, dtype=np.float64)
    if o.shape != a.shape or o.ndim != 2:
        raise ValueError("original and augmented latents must have the same (n, dim) shape")
    return np.linalg.norm(o - a, axis=1)


def distance_kde(orig_latents, aug_latents, grid=None, n_grid=512, bandwidth=None) -> dict:
    """Density of Euclidean distances between each original and its own augmentation.

    Without an explicit ``grid`` the curve spans the distances padded by five
    bandwidths on each side, which holds all but ~1e-6 of the mass.
    """
    d = pair_distances(orig_latents, aug_latents)
    if d.size < 2:
        raise ValueError("need at least 2 pairs for a density estimate")
    h = float(bandwidth) if bandwidth is not None else silverman_bandwidth(d)
    if grid is None:
        grid = np.linspace(d.min() - 5 * h, d.max() + 5 * h, n_grid)
    grid = np.asarray(grid, dtype=np.float64)
    return {"grid": grid, "density": gaussian_kde_1d(d, grid, h), "bandwidth": h, "distances": d}


def pca_2d(latents) -> dict:
    """Project onto the top two principal components.

    Each component is signed so that its largest-magnitude loading is
    positive. Returns ``coords`` (n, 2), ``explained_variance_ratio`` (2,)
    and ``components`` (2, dim).
    """
    z = np.asarray(latents, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 3:
        raise ValueError("need at least 3 points in a 2-d array")
    zc = z - z.mean(axis=0)
    _, s, vt = np.linalg.svd(zc, full_matrices=False)
    var = s**2
    if var.sum() <= 0 or s[0] <= 1e-12 * max(1.0, np.abs(z).max()):
        raise ValueError("data has rank 0 after centering")
    comps = vt[:2].copy()
    if comps.shape[0] < 2:
        comps = np.vstack([comps, np.zeros_like(comps)])
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1
    ratio = np.zeros(2)
    ratio[: min(2, len(var))] = var[:2] / var.sum()
    return {"coords": zc @ comps.T, "explained_variance_ratio": ratio, "components": comps}
