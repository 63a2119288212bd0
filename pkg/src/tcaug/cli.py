"""Command-line front end.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 every run failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .analysis.latent import distance_kde, knn_anchor_stats
from .analysis.ranking import ranking_report
from .augment import CATALOG, AugmentationSpec
from .batching import make_aug_fn
from .bench import init_seed, load_results, rank_methods, run_benchmark_grid, run_stem, write_ranking
from .config import ConfigError, RunConfig
from .flowdata import DataError, class_counts, compute_class_stats, imbalance_ratio, ingest_jsonl, make_fold, synth_generate, write_jsonl
from .model.checkpoint import save_checkpoint
from .model.network import ModelConfig, init_model
from .model.train import fit
from .outputs import read_csv, write_csv, write_json, write_npz
from .report import ReportError, emit_report
from .rng import RngStream

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ALL_FAILED = 0, 1, 2, 3

log = logging.getLogger("tcaug")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=d, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--jobs", type=int, default=d, help="parallel runs (default 1)")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tcaug", description="Packet time-series augmentation benchmark", parents=[_common(False)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_common(True)]

    p = sub.add_parser("synth", parents=common, help="generate a synthetic flow dataset (flows.jsonl)")
    p.add_argument("--n-classes", type=int, default=5)
    p.add_argument("--flows-per-class", default="400", help="one count or a comma-separated list per class")
    p.add_argument("--jitter", type=float, default=1.0)

    p = sub.add_parser("stats", parents=common, help="class statistics of a flows file (stats.json)")
    p.add_argument("data", help="flows JSONL")

    p = sub.add_parser("augment", parents=common, help="augment every flow of a file (augmented.jsonl)")
    p.add_argument("data", help="flows JSONL")
    p.add_argument("--aug", required=True, choices=sorted(CATALOG))
    p.add_argument("--magnitude", default="uniform", help="'uniform' or a fixed value in (0, 1)")
    p.add_argument("--copies", type=int, default=1)

    p = sub.add_parser("train", parents=common, help="train one model on one fold (run JSON and checkpoint)")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--aug", default=None, help="augmentation name; omit for the NoAug baseline")

    sub.add_parser("bench", parents=common, help="run the augmentation x fold grid")

    p = sub.add_parser("rank", parents=common, help="mean ranks and critical distance (ranking.json/csv)")
    p.add_argument("source", help="results directory, or a CSV with one column per method and one row per run")

    p = sub.add_parser("latent", parents=common, help="anchor and distance-density analysis of latent dumps")
    p.add_argument("results", help="results directory with latents/")
    p.add_argument("-k", type=int, default=10)

    p = sub.add_parser("report", parents=common, help="emit the report bundle of a results directory")
    p.add_argument("results", help="results directory")
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.master_seed = int(args.seed)
    cfg.validate()
    return cfg


def _out(args, default: str) -> Path:
    return Path(args.out if args.out else default)


def _tag(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "master_seed": int(cfg.master_seed)}


def cmd_synth(args, cfg):
    try:
        per = [int(v) for v in str(args.flows_per_class).split(",")]
    except ValueError as e:
        raise UsageError(f"--flows-per-class: {e}") from None
    if len(per) == 1:
        per = per * args.n_classes
    flows = synth_generate(args.n_classes, per, seed=int(cfg.master_seed), jitter=args.jitter)
    out = _out(args, ".")
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(flows, out / "flows.jsonl")
    print(f"wrote {len(flows)} flows to {out / 'flows.jsonl'}")
    return EXIT_OK


def cmd_stats(args, cfg):
    flows = ingest_jsonl(args.data)
    stats = compute_class_stats(flows)
    out = _out(args, ".")
    write_json(out / "stats.json", {
        "class_counts": class_counts(flows), "imbalance_ratio": imbalance_ratio(flows),
        "stats": stats.to_dict(), **_tag(cfg),
    })  # fmt: skip
    print(f"{len(flows)} flows, {len(stats.classes)} classes, q_iat_99={stats.q_iat_99:.6g}")
    return EXIT_OK


def cmd_augment(args, cfg):
    flows = ingest_jsonl(args.data)
    stats = compute_class_stats(flows)
    try:
        spec = AugmentationSpec.from_name(args.aug, args.magnitude)
    except ValueError as e:
        raise UsageError(str(e)) from None
    fn = make_aug_fn(spec, stats)
    rng = RngStream((int(cfg.master_seed), 0xA06)).generator()
    out_flows = [f for _ in range(args.copies) for f in fn(flows, rng)]
    out = _out(args, ".")
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out_flows, out / "augmented.jsonl")
    print(f"wrote {len(out_flows)} augmented flows to {out / 'augmented.jsonl'}")
    return EXIT_OK


def cmd_train(args, cfg):
    flows = cfg.load_flows()
    split = make_fold(flows, cfg.fold_seed, args.fold)
    base = cfg.base_plan()
    if args.aug is None:
        plan = base.baseline()
    else:
        try:
            plan = base.with_augmenter(AugmentationSpec.from_name(args.aug, cfg.magnitude))
        except ValueError as e:
            raise UsageError(str(e)) from None
    model = init_model(ModelConfig(len(split.classes), width=cfg.width), init_seed(cfg.master_seed, args.fold))
    res = fit(model, split, plan, cfg.train_config(), seed=int(cfg.master_seed), run_id=args.fold << 16,
              keep_latents=cfg.latents, n_latent_augs=cfg.n_latent_augs)  # fmt: skip
    res.meta.update({"fold_index": args.fold, **_tag(cfg)})
    out = _out(args, "run")
    stem = run_stem(args.fold, plan.aug_name)
    write_json(out / "runs" / f"{stem}.json", res.to_dict())
    if res.latents is not None:
        write_npz(out / "latents" / f"{stem}.npz", res.latents)
    save_checkpoint(model, out / f"{stem}.npz")
    print(f"{plan.aug_name}: weighted F1 {res.weighted_f1:.2f} after {res.epochs_trained} epochs")
    return EXIT_OK


def cmd_bench(args, cfg):
    outcome = run_benchmark_grid(cfg, _out(args, "bench"), jobs=args.jobs or 1)
    print(f"{len(outcome.results)} runs ok, {len(outcome.failures)} failed")
    if outcome.ranking is not None:
        for m, r in outcome.ranking.ordered():
            print(f"  {r:6.2f}  {m}")
    return EXIT_ALL_FAILED if outcome.all_failed else EXIT_OK


def cmd_rank(args, cfg):
    src = Path(args.source)
    if src.is_dir():
        results = load_results(src)
        if not results:
            raise DataError(f"{src}: no run results")
        methods = list(dict.fromkeys(r.aug_name for r in results))
        report = rank_methods(results, methods)
        if report is None:
            raise DataError(f"{src}: need at least two augmentations on a common fold")
    else:
        rows = read_csv(src)
        if not rows:
            raise DataError(f"{src}: empty score table")
        methods = list(rows[0])
        try:
            scores = np.array([[float(r[m]) for m in methods] for r in rows])
        except ValueError as e:
            raise DataError(f"{src}: {e}") from None
        report = ranking_report(scores, methods)
    write_ranking(_out(args, "."), report, _tag(cfg))
    for m, r in report.ordered():
        print(f"{r:6.2f}  {m}")
    print(f"CD = {report.cd:.4f} (k={report.n_methods}, N={report.n_runs})")
    return EXIT_OK


def cmd_latent(args, cfg):
    src = Path(args.results)
    files = sorted(src.glob("latents/*.npz"))
    if not files:
        raise DataError(f"{src}: no latent dumps under latents/")
    anchor, kde = [], []
    tag = _tag(cfg)
    for p in files:
        with np.load(p) as z:
            for mode in ("all", "aug_only"):
                s = knn_anchor_stats(z["train"], z["train_labels"], z["aug"], z["aug_labels"],
                                     z["test"], z["test_labels"], mode=mode, k=args.k)  # fmt: skip
                anchor.append([p.stem, mode, s.mean_matched, s.mean_cosine, s.mean_distance_ratio,
                               tag["config_hash"], tag["master_seed"]])  # fmt: skip
            n = len(z["train"])
            d = distance_kde(z["train"], z["aug"][:n], n_grid=100)
            kde += [[p.stem, g, v, d["bandwidth"], tag["config_hash"], tag["master_seed"]]
                    for g, v in zip(d["grid"], d["density"])]  # fmt: skip
    out = _out(args, str(src / "latent"))
    write_csv(out / "anchors.csv", ["run", "mode", "mean_matched", "mean_cosine", "mean_distance_ratio",
                                    "config_hash", "master_seed"], anchor)  # fmt: skip
    write_csv(out / "kde.csv", ["run", "distance", "density", "bandwidth", "config_hash", "master_seed"], kde)
    print(f"analysed {len(files)} latent dumps into {out}")
    return EXIT_OK


def cmd_report(args, cfg):
    manifest = emit_report(args.results, args.out)
    print(json.dumps(manifest["files"], sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth, "stats": cmd_stats, "augment": cmd_augment, "train": cmd_train,
    "bench": cmd_bench, "rank": cmd_rank, "latent": cmd_latent, "report": cmd_report,
}  # fmt: skip


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"tcaug: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    if args.jobs is not None and args.jobs < 1:
        print("tcaug: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as e:
        print(f"tcaug: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ReportError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"tcaug: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
