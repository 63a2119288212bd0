"""Train the NoAug baseline and one augmented model on a single fold.

Run with ``python3 demos/train_baseline.py``. Takes a few seconds.
"""

from tcaug.batching import BatchPlan
from tcaug.flowdata import class_counts, curate, make_fold, synth_generate
from tcaug.model.network import ModelConfig, init_model
from tcaug.model.train import TrainConfig, fit

# %% Data: five classes, one 80/10/10 split
flows = curate(synth_generate(5, [200, 150, 100, 60, 30], seed=3, jitter=3.0))
split = make_fold(flows, seed=0, index=0)
print("class counts:", class_counts(flows))
print(f"train/val/test: {len(split.train)}/{len(split.val)}/{len(split.test)}")

cfg = TrainConfig(max_epochs=30)

# %% Baseline, then Window Mask with one injected copy per sample
for plan in (BatchPlan(batch_size=256),
             BatchPlan.from_dict({"policy": "inject", "augmentation": "window_mask", "batch_size": 256})):
    net = init_model(ModelConfig(len(split.classes), width=32), seed=1)
    res = fit(net, split, plan, cfg, seed=1)
    print(f"{res.aug_name:12s} weighted F1 {res.weighted_f1:6.2f}  "
          f"epochs {res.epochs_trained:3d}  best epoch {res.best_epoch}")
