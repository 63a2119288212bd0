"""Save and restore model weights as ``.npz`` archives."""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from ..outputs import write_npz
from .network import ModelConfig, Net

_META = "__meta__"


def save_checkpoint(model: Net, path) -> None:
    """Write parameters, batch-norm buffers and the config (plus its digest)."""
    meta = {"config": asdict(model.cfg), "config_hash": model.cfg.digest(), "dtype": model.dtype.name}
    arrays = model.state_dict()
    arrays[_META] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    write_npz(path, arrays)


def load_checkpoint(path) -> Net:
    with np.load(path) as z:
        meta = json.loads(bytes(z[_META]).decode())
        cfg = ModelConfig(**meta["config"])
        if cfg.digest() != meta["config_hash"]:
            raise ValueError(f"{path}: config hash mismatch")
        net = Net(cfg, dtype=meta["dtype"])
        state = {k: z[k] for k in z.files if k != _META}
    missing = set(net.state_dict()) - set(state)
    if missing:
        raise ValueError(f"{path}: missing tensors {sorted(missing)}")
    net.load_state_dict(state)
    return net
