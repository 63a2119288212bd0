"""Shared test helpers."""

import numpy as np

from tcaug.flowdata import T, flow_from_arrays


def make_flow(label="a", n=T, seed=0, flow_id=None):
    rng = np.random.default_rng(seed)
    return flow_from_arrays(
        flow_id or f"{label}-{seed}",
        label,
        rng.uniform(40, 1460, n),
        rng.choice([-1, 1], n),
        rng.exponential(0.01, n),
    )
