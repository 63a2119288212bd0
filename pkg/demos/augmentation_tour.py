"""A short tour of the augmentation catalog on one synthetic flow.

Run with ``python3 demos/augmentation_tour.py``.
"""

import numpy as np

from tcaug.augment import CATALOG, Kind, apply, apply_pair
from tcaug.flowdata import compute_class_stats, synth_generate
from tcaug.rng import RngStream

np.set_printoptions(precision=3, suppress=True, linewidth=120)

# %% A small dataset and the statistics the amplitude operators need
flows = synth_generate(3, [30, 30, 30], seed=11)
stats = compute_class_stats(flows)
x, partner = flows[0], flows[1]
print(f"flow {x.flow_id} ({x.label}), {x.valid_len} valid packets")
print("size     ", x.values[0])
print("direction", x.values[1])
print("iat      ", x.values[2])

# %% Every single-sample operator at a mid magnitude; each one gets its own stream
alpha = 0.5
for i, name in enumerate(CATALOG):
    kind = Kind(name)
    rng = RngStream((0, 0, 0, i)).generator()
    if kind.pairwise:
        y, _ = apply_pair(kind, x, partner, alpha, stats, rng)
    else:
        y = apply(kind, x, alpha, stats, rng)
    changed = int((y.values != x.values).any(axis=0).sum())
    print(f"{kind.display_name:16s} [{kind.family.value:9s}] columns changed: {changed:2d}  valid_len: {y.valid_len}")

# %% Same stream key, same output
a = apply("wrap", x, alpha, stats, RngStream((5, 1, 1, 3)).generator())
b = apply("wrap", x, alpha, stats, RngStream((5, 1, 1, 3)).generator())
print("replay identical:", a == b)
