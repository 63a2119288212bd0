"""Benchmark grid: every augmentation on every fold, against a NoAug baseline.

Output layout under ``out``::

    runs/fold000__none.json        one RunResult per (fold, method)
    latents/fold000__none.npz      when latents are requested
    aggregate.csv                  per-method mean wF1, mean gain and 95% CIs
    ranking.json, ranking.csv      mean ranks of the augmentations and the CD
    summary.json                   run counts and failures

Every file carries the config hash and the master seed.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis.ranking import ranking_report
from .batching import BatchPlan
from .config import RunConfig
from .flowdata import DatasetSplit, make_fold
from .model.network import ModelConfig, init_model
from .model.train import RunResult, fit
from .outputs import read_json, write_csv, write_json, write_npz
from .rng import RngStream

log = logging.getLogger(__name__)

BASELINE = "none"
_INIT_STREAM = 0xF01D


def slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def run_stem(fold: int, method: str) -> str:
    return f"fold{fold:03d}__{slug(method)}"


def init_seed(master_seed: int, fold: int) -> int:
    """Model-initialization seed shared by every method on a fold (paired comparison)."""
    return int(RngStream((int(master_seed), int(fold), _INIT_STREAM)).generator().integers(2**62))


def run_id(fold: int, j: int) -> int:
    return (int(fold) << 16) | int(j)


@dataclass
class Task:
    fold: int
    j: int
    split: DatasetSplit
    plan: BatchPlan
    cfg: RunConfig = field(repr=False)


def _execute(task: Task):
    """Train one (fold, method) cell; returns ``(result, None)`` or ``(None, error)``."""
    cfg = task.cfg
    model = init_model(ModelConfig(len(task.split.classes), width=cfg.width), init_seed(cfg.master_seed, task.fold))
    try:
        res = fit(
            model, task.split, task.plan, cfg.train_config(),
            seed=int(cfg.master_seed), run_id=run_id(task.fold, task.j),
            keep_latents=cfg.latents, n_latent_augs=cfg.n_latent_augs,
        )  # fmt: skip
    except Exception as e:  # noqa: BLE001 - a failed cell must not stop the grid
        log.debug("run failed", exc_info=True)
        return None, f"{type(e).__name__}: {e}"
    res.meta.update({"fold_index": task.fold, "config_hash": cfg.config_hash(), "master_seed": int(cfg.master_seed)})
    return res, None


def build_tasks(cfg: RunConfig, flows) -> list[Task]:
    base = cfg.base_plan()
    if base.policy == "noaug":
        raise ValueError("the benchmark plan needs an augmentation policy (replace, inject or preaugment)")
    augs = cfg.augmenters()
    tasks = []
    for fold in range(cfg.n_folds):
        split = make_fold(flows, cfg.fold_seed, fold)
        tasks.append(Task(fold, 0, split, base.baseline(), cfg))
        for j, aug in enumerate(augs, start=1):
            tasks.append(Task(fold, j, split, base.with_augmenter(aug), cfg))
    return tasks


def ci95(values) -> float:
    """Half-width ``1.96 * std / sqrt(n)``; NaN with fewer than two values."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float("nan")
    return 1.96 * float(np.std(v, ddof=1)) / math.sqrt(v.size)


def aggregate(results: list[RunResult], methods: list[str]) -> list[dict]:
    """One row per method: mean wF1, mean paired gain over the baseline, CIs."""
    by = {(r.meta["fold_index"], r.aug_name): r for r in results}
    folds = sorted({f for f, _ in by})
    rows = []
    for m in methods:
        f1 = [by[(f, m)].weighted_f1 for f in folds if (f, m) in by]
        gains = [by[(f, m)].weighted_f1 - by[(f, BASELINE)].weighted_f1 for f in folds if (f, m) in by and (f, BASELINE) in by]
        epochs = [by[(f, m)].epochs_trained for f in folds if (f, m) in by]
        rows.append({
            "method": m,
            "n_runs": len(f1),
            "mean_wf1": float(np.mean(f1)) if f1 else float("nan"),
            "ci95_wf1": ci95(f1),
            "mean_gain": float(np.mean(gains)) if gains and m != BASELINE else float("nan"),
            "ci95_gain": ci95(gains) if m != BASELINE else float("nan"),
            "mean_epochs": float(np.mean(epochs)) if epochs else float("nan"),
        })  # fmt: skip
    return rows


def rank_methods(results: list[RunResult], methods: list[str]):
    """Ranking over the augmentations (baseline excluded) on folds where all succeeded."""
    augs = [m for m in methods if m != BASELINE]
    if len(augs) < 2:
        return None
    by = {(r.meta["fold_index"], r.aug_name): r.weighted_f1 for r in results}
    folds = sorted({f for f, _ in by if all((f, m) in by for m in augs)})
    if not folds:
        return None
    scores = np.array([[by[(f, m)] for m in augs] for f in folds])
    return ranking_report(scores, augs)


def write_ranking(out: Path, report, tag: dict) -> None:
    write_json(out / "ranking.json", {**report.to_dict(), **tag})
    rows = [(m, r, i + 1, report.cd, tag["config_hash"], tag["master_seed"]) for i, (m, r) in enumerate(report.ordered())]
    write_csv(out / "ranking.csv", ["method", "mean_rank", "position", "cd", "config_hash", "master_seed"], rows)


def write_aggregate(out: Path, rows: list[dict], report, tag: dict) -> None:
    ranks = report.mean_rank if report is not None else {}
    header = ["method", "n_runs", "mean_wf1", "ci95_wf1", "mean_gain", "ci95_gain", "mean_epochs", "mean_rank", "config_hash", "master_seed"]
    table = [
        [r["method"], r["n_runs"], r["mean_wf1"], r["ci95_wf1"], r["mean_gain"], r["ci95_gain"], r["mean_epochs"],
         ranks.get(r["method"]), tag["config_hash"], tag["master_seed"]]
        for r in rows
    ]  # fmt: skip
    write_csv(out / "aggregate.csv", header, table)


@dataclass
class BenchOutcome:
    results: list
    failures: list
    methods: list
    ranking: object

    @property
    def all_failed(self) -> bool:
        return not self.results


def run_benchmark_grid(cfg: RunConfig, out, jobs: int = 1, flows=None) -> BenchOutcome:
    """Run the (method x fold) grid, writing per-run and aggregate files under ``out``."""
    out = Path(out)
    flows = cfg.load_flows() if flows is None else flows
    tasks = build_tasks(cfg, flows)
    methods = [BASELINE] + [a.name for a in cfg.augmenters()]
    tag = {"config_hash": cfg.config_hash(), "master_seed": int(cfg.master_seed)}
    log.info("benchmark: %d runs (%d methods x %d folds)", len(tasks), len(methods), cfg.n_folds)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute, tasks))
    else:
        outcomes = [_execute(t) for t in tasks]

    results, failures = [], []
    for task, (res, err) in zip(tasks, outcomes):
        method = methods[task.j]
        stem = run_stem(task.fold, method)
        if err is not None:
            log.warning("run %s failed: %s", stem, err)
            failures.append({"fold": task.fold, "method": method, "error": err})
            continue
        write_json(out / "runs" / f"{stem}.json", res.to_dict())
        if res.latents is not None:
            write_npz(out / "latents" / f"{stem}.npz", res.latents)
            res.latents = None  # on disk now; a full grid would not fit in memory
        results.append(res)

    report = rank_methods(results, methods)
    write_aggregate(out, aggregate(results, methods), report, tag)
    if report is not None:
        write_ranking(out, report, tag)
    write_json(out / "summary.json", {
        **tag,
        "config": cfg.to_dict(),
        "methods": methods,
        "n_folds": cfg.n_folds,
        "n_runs": len(tasks),
        "n_ok": len(results),
        "n_failed": len(failures),
        "failures": failures,
    })  # fmt: skip
    return BenchOutcome(results, failures, methods, report)


def load_results(results_dir) -> list[RunResult]:
    """Every ``runs/*.json`` below ``results_dir`` in file-name order."""
    runs = sorted(Path(results_dir).glob("runs/*.json"))
    return [RunResult.from_dict(read_json(p)) for p in runs]
