"""Look at how augmented samples sit in a trained model's latent space.

Run with ``python3 demos/latent_space.py``.
"""

import numpy as np

from tcaug.analysis.latent import distance_kde, knn_anchor_stats, pca_2d
from tcaug.batching import BatchPlan
from tcaug.flowdata import compute_class_stats, curate, make_fold, synth_generate
from tcaug.model.network import ModelConfig, init_model
from tcaug.model.train import TrainConfig, fit

flows = curate(synth_generate(4, [100] * 4, seed=5, jitter=3.0))
split = make_fold(flows, seed=0, index=0)
plan = BatchPlan.from_dict({"policy": "inject", "augmentation": "permutation", "batch_size": 128})
net = init_model(ModelConfig(len(split.classes), width=16), seed=0)
res = fit(net, split, plan, TrainConfig(max_epochs=10), seed=0, keep_latents=True, n_latent_augs=3)
z = res.latents
print({k: np.shape(v) for k, v in z.items()})

# %% Do the nearest anchors of each test sample carry its label?
for mode in ("all", "aug_only"):
    s = knn_anchor_stats(z["train"], z["train_labels"], z["aug"], z["aug_labels"],
                         z["test"], z["test_labels"], mode=mode, k=10)
    print(mode, s.summary())

# %% Distance between each training sample and its first augmented copy
kde = distance_kde(z["train"], z["aug"][: len(z["train"])])
mode = kde["grid"][int(np.argmax(kde["density"]))]
print(f"bandwidth {kde['bandwidth']:.4f}, density peaks at distance {mode:.4f}")

# %% Two principal components, e.g. for a scatter plot
p = pca_2d(np.concatenate([z["train"], z["aug"]]))
print("explained variance ratio:", np.round(p["explained_variance_ratio"], 3))
