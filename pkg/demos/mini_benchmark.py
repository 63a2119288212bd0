"""A miniature benchmark grid: rank a few augmentations and emit a report.

Run with ``python3 demos/mini_benchmark.py [out_dir]``. Uses two folds and a
narrow model, so the numbers only show the pipeline, not real effect sizes.
"""

import json
import sys
from pathlib import Path

from tcaug.bench import run_benchmark_grid
from tcaug.config import RunConfig
from tcaug.report import emit_report

out = Path(sys.argv[1] if len(sys.argv) > 1 else "mini_bench")

cfg = RunConfig.from_dict({
    "dataset": {"synth": {"n_classes": 4, "flows_per_class": 120, "seed": 2, "jitter": 4.0}},
    "n_folds": 2,
    "augmentations": ["gaussian_noise", "window_mask", "translation", "dup_rto"],
    "plan": {"policy": "inject", "n_inject": 1, "batch_size": 256},
    "train": {"max_epochs": 10},
    "width": 16,
    "latents": True,
})

# %% Baseline plus four augmentations on two folds, with latent dumps
outcome = run_benchmark_grid(cfg, out)
print(f"{len(outcome.results)} runs, {len(outcome.failures)} failed")

# %% Mean ranks (lower is better) and the critical distance
rk = outcome.ranking
for m in sorted(rk.mean_rank, key=rk.mean_rank.get):
    print(f"  {m:15s} mean rank {rk.mean_rank[m]:.2f}")
print(f"critical distance: {rk.cd:.3f}")

# %% Report bundle
manifest = emit_report(out)
print(json.dumps(manifest["files"], indent=2))
