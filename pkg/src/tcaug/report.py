"""Report bundle: the data behind the benchmark table and figures.

``emit_report`` reads a results directory written by the benchmark grid and
emits plain CSV/JSON files:

=====================  =====================================================
``table.csv``          per-method mean wF1 (and mean gain over NoAug) + CIs
``cd_diagram.json``    mean ranks, critical distance and equivalence bars
``batching.csv``       mean gain per (method, policy, policy parameter)
``anchors.csv``        nearest-anchor label agreement vs cosine similarity
``kde.csv``            density of original-to-augmented latent distances
``gain_epochs.csv``    per-run gain against the change in epochs trained
``report.json``        manifest of the files above
=====================  =====================================================

Anchor and KDE outputs need the ``latents/`` dumps and are skipped, with a
warning, when those are missing.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from .analysis.latent import gaussian_kde_1d, knn_anchor_stats, pair_distances, silverman_bandwidth
from .augment import CATALOG
from .bench import BASELINE, ci95, load_results, rank_methods, run_stem
from .outputs import read_json, write_csv, write_json

log = logging.getLogger(__name__)

KDE_POINTS = 200


class ReportError(ValueError):
    pass


def family_of(method: str) -> str:
    if method == BASELINE:
        return "baseline"
    kind = CATALOG.get(method)
    return kind.family.value if kind is not None else "combination"


def _fold(r) -> int:
    return int(r.meta["fold_index"])


def _tag(results_dir: Path, results) -> dict:
    summary = results_dir / "summary.json"
    if summary.exists():
        s = read_json(summary)
        return {"config_hash": s["config_hash"], "master_seed": s["master_seed"]}
    meta = results[0].meta
    return {"config_hash": meta.get("config_hash", ""), "master_seed": meta.get("master_seed", meta.get("seed", 0))}


def _baselines(results) -> dict:
    """``(fold, class_weighted) -> baseline RunResult``."""
    return {(_fold(r), r.plan.get("class_weighted", False)): r for r in results if r.aug_name == BASELINE}


def _gain(r, base) -> float | None:
    b = base.get((_fold(r), r.plan.get("class_weighted", False)))
    return None if b is None else r.weighted_f1 - b.weighted_f1


def _methods(results) -> list[str]:
    seen = []
    for r in sorted(results, key=lambda r: r.aug_name != BASELINE):
        if r.aug_name not in seen:
            seen.append(r.aug_name)
    return seen


def benchmark_table(results, tag) -> tuple[list, list]:
    base = _baselines(results)
    methods = _methods(results)
    with_gain = any(m != BASELINE for m in methods)
    header = ["method", "family", "n_runs", "mean_wf1", "ci95_wf1"]
    if with_gain:
        header += ["mean_gain", "ci95_gain"]
    header += ["config_hash", "master_seed"]
    rows = []
    for m in methods:
        rs = [r for r in results if r.aug_name == m]
        f1 = [r.weighted_f1 for r in rs]
        row = [m, family_of(m), len(rs), float(np.mean(f1)), ci95(f1)]
        if with_gain:
            g = [x for x in (_gain(r, base) for r in rs) if x is not None] if m != BASELINE else []
            row += [float(np.mean(g)) if g else None, ci95(g) if g else None]
        rows.append(row + [tag["config_hash"], tag["master_seed"]])
    rows.sort(key=lambda row: (row[0] != BASELINE, -(row[5] if with_gain and row[5] is not None else 0.0), row[0]))
    return header, rows


def cd_groups(ordered, cd) -> list[list[str]]:
    """Maximal runs of consecutive methods (in rank order) whose mean ranks span less than ``cd``."""
    names = [m for m, _ in ordered]
    ranks = [r for _, r in ordered]
    groups = []
    for i in range(len(names)):
        j = i
        while j + 1 < len(names) and ranks[j + 1] - ranks[i] < cd:
            j += 1
        if j > i and not any(g[0] <= i and j <= g[1] for g in groups):
            groups.append((i, j))
    return [names[a : b + 1] for a, b in groups]


def batching_rows(results, tag) -> list:
    base = _baselines(results)
    cells = defaultdict(list)
    for r in results:
        if r.aug_name == BASELINE:
            continue
        policy = r.plan.get("policy")
        param = {"replace": r.plan.get("p_replace"), "inject": r.plan.get("n_inject"), "preaugment": r.plan.get("factor")}.get(policy)
        g = _gain(r, base)
        if g is not None:
            cells[(r.aug_name, policy, param, r.plan.get("class_weighted", False))].append(g)
    rows = []
    for (m, policy, param, cw), g in sorted(cells.items(), key=lambda kv: tuple(str(x) for x in kv[0])):
        rows.append([m, policy, param, cw, len(g), float(np.mean(g)), ci95(g), tag["config_hash"], tag["master_seed"]])
    return rows


def gain_epoch_rows(results, tag) -> list:
    base = _baselines(results)
    rows = []
    for r in sorted(results, key=lambda r: (_fold(r), r.aug_name)):
        b = base.get((_fold(r), r.plan.get("class_weighted", False)))
        if r.aug_name == BASELINE or b is None:
            continue
        rows.append([r.aug_name, _fold(r), r.weighted_f1 - b.weighted_f1, r.epochs_trained, b.epochs_trained,
                     r.epochs_trained - b.epochs_trained, tag["config_hash"], tag["master_seed"]])  # fmt: skip
    return rows


def _latent_files(results_dir: Path, results) -> dict:
    found = {}
    for r in results:
        p = results_dir / "latents" / f"{run_stem(_fold(r), r.aug_name)}.npz"
        if p.exists():
            found[(_fold(r), r.aug_name)] = p
    return found


def anchor_rows(results, files, tag, k=10) -> list:
    acc = defaultdict(lambda: defaultdict(list))
    f1 = defaultdict(list)
    for r in results:
        key = (_fold(r), r.aug_name)
        if key not in files or r.aug_name == BASELINE:
            continue
        with np.load(files[key]) as z:
            for mode in ("all", "aug_only"):
                s = knn_anchor_stats(z["train"], z["train_labels"], z["aug"], z["aug_labels"],
                                     z["test"], z["test_labels"], mode=mode, k=k)  # fmt: skip
                acc[(r.aug_name, mode)]["matched"].append(s.mean_matched)
                acc[(r.aug_name, mode)]["cosine"].append(s.mean_cosine)
                acc[(r.aug_name, mode)]["ratio"].append(s.mean_distance_ratio)
        f1[r.aug_name].append(r.weighted_f1)
    rows = []
    for (m, mode), v in sorted(acc.items()):
        rows.append([m, mode, len(v["matched"]), float(np.mean(v["matched"])), float(np.mean(v["cosine"])),
                     float(np.nanmean(v["ratio"])), float(np.mean(f1[m])), tag["config_hash"], tag["master_seed"]])  # fmt: skip
    return rows


def kde_rows(results, files, tag, n_points=KDE_POINTS) -> list:
    """Each original paired with its first augmented copy; one common grid for all methods."""
    dists = defaultdict(list)
    for r in results:
        key = (_fold(r), r.aug_name)
        if key not in files or r.aug_name == BASELINE:
            continue
        with np.load(files[key]) as z:
            n = len(z["train"])
            dists[r.aug_name].append(pair_distances(z["train"], z["aug"][:n]))
    if not dists:
        return []
    pooled = {m: np.concatenate(v) for m, v in dists.items()}
    hs = {m: silverman_bandwidth(d) for m, d in pooled.items()}
    hi = max(float(d.max()) + 5 * hs[m] for m, d in pooled.items())
    grid = np.linspace(0.0, hi, n_points)
    rows = []
    for m in sorted(pooled):
        dens = gaussian_kde_1d(pooled[m], grid, hs[m])
        rows += [[m, g, p, hs[m], tag["config_hash"], tag["master_seed"]] for g, p in zip(grid, dens)]
    return rows


def emit_report(results_dir, out=None) -> dict:
    """Write the report bundle for ``results_dir`` into ``out`` (default ``results_dir/report``)."""
    results_dir = Path(results_dir)
    results = load_results(results_dir)
    if not results:
        raise ReportError(f"{results_dir}: no run results found under runs/")
    out = Path(out) if out is not None else results_dir / "report"
    tag = _tag(results_dir, results)
    files = {}

    header, rows = benchmark_table(results, tag)
    write_csv(out / "table.csv", header, rows)
    files["table"] = "table.csv"

    ranking = rank_methods(results, _methods(results))
    if ranking is not None:
        ordered = ranking.ordered()
        write_json(out / "cd_diagram.json", {
            "methods": [{"name": m, "mean_rank": r} for m, r in ordered],
            "cd": ranking.cd, "n_runs": ranking.n_runs, "n_methods": ranking.n_methods,
            "groups": cd_groups(ordered, ranking.cd), **tag,
        })  # fmt: skip
        write_csv(out / "cd_diagram.csv", ["method", "mean_rank", "cd", "config_hash", "master_seed"],
                  [[m, r, ranking.cd, tag["config_hash"], tag["master_seed"]] for m, r in ordered])  # fmt: skip
        files["cd_diagram"] = "cd_diagram.json"

    b_rows = batching_rows(results, tag)
    if b_rows:
        write_csv(out / "batching.csv", ["method", "policy", "param", "class_weighted", "n_runs", "mean_gain",
                                         "ci95_gain", "config_hash", "master_seed"], b_rows)  # fmt: skip
        files["batching"] = "batching.csv"

    g_rows = gain_epoch_rows(results, tag)
    if g_rows:
        write_csv(out / "gain_epochs.csv", ["method", "fold", "gain", "epochs", "baseline_epochs", "epoch_delta",
                                            "config_hash", "master_seed"], g_rows)  # fmt: skip
        files["gain_epochs"] = "gain_epochs.csv"

    latent_files = _latent_files(results_dir, results)
    if not latent_files:
        log.warning("no latent dumps under %s/latents; skipping anchor and KDE outputs", results_dir)
    else:
        a_rows = anchor_rows(results, latent_files, tag)
        write_csv(out / "anchors.csv", ["method", "mode", "n_runs", "mean_matched", "mean_cosine",
                                        "mean_distance_ratio", "mean_wf1", "config_hash", "master_seed"], a_rows)  # fmt: skip
        files["anchors"] = "anchors.csv"
        k_rows = kde_rows(results, latent_files, tag)
        write_csv(out / "kde.csv", ["method", "distance", "density", "bandwidth", "config_hash", "master_seed"], k_rows)
        files["kde"] = "kde.csv"

    manifest = {"files": files, "n_runs": len(results), **tag}
    write_json(out / "report.json", manifest)
    return manifest
