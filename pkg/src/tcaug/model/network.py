"""Compact residual 1d-CNN: stem, two residual blocks, pooled 128-d latent."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from ..flowdata import D, T
from ..rng import RngStream
from .layers import BatchNorm1d, Conv1d, Linear, relu_backward, relu_forward

# parameters of everything but the linear head at the default width
BACKBONE_PARAMS = 112_448


@dataclass(frozen=True)
class ModelConfig:
    n_classes: int
    width: int = 64
    in_channels: int = D
    seq_len: int = T

    @property
    def latent_dim(self) -> int:
        return 2 * self.width

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


class ResBlock:
    """conv(k3, s2)-BN-ReLU-conv(k3)-BN plus a k1/s2 conv-BN shortcut, then ReLU."""

    def __init__(self, name, c_in, c_out, stride=2, dtype=np.float32):
        self.conv1 = Conv1d(f"{name}.conv1", c_in, c_out, 3, stride, 1, dtype)
        self.bn1 = BatchNorm1d(f"{name}.bn1", c_out, dtype=dtype)
        self.conv2 = Conv1d(f"{name}.conv2", c_out, c_out, 3, 1, 1, dtype)
        self.bn2 = BatchNorm1d(f"{name}.bn2", c_out, dtype=dtype)
        self.short = Conv1d(f"{name}.shortcut.conv", c_in, c_out, 1, stride, 0, dtype)
        self.short_bn = BatchNorm1d(f"{name}.shortcut.bn", c_out, dtype=dtype)
        self._h = self._out = None

    def layers(self):
        return [self.conv1, self.bn1, self.conv2, self.bn2, self.short, self.short_bn]

    def forward(self, x, train=False, trace=None):
        h = self.conv1.forward(x, train)
        _log(trace, "Conv1d", h, self.conv1)
        h = self.bn1.forward(h, train)
        _log(trace, "BatchNorm1d", h, self.bn1)
        h = relu_forward(h)
        h2 = self.conv2.forward(h, train)
        _log(trace, "Conv1d", h2, self.conv2)
        h2 = self.bn2.forward(h2, train)
        _log(trace, "BatchNorm1d", h2, self.bn2)
        s = self.short.forward(x, train)
        _log(trace, "Conv1d", s, self.short)
        s = self.short_bn.forward(s, train)
        _log(trace, "BatchNorm1d", s, self.short_bn)
        out = relu_forward(h2 + s)
        if train:
            self._h, self._out = h, out
        return out

    def backward(self, dout):
        d = relu_backward(dout, self._out)
        ds = self.short.backward(self.short_bn.backward(d))
        dh = self.conv2.backward(self.bn2.backward(d))
        dh = relu_backward(dh, self._h)
        dx = self.conv1.backward(self.bn1.backward(dh))
        return dx + ds


def _log(trace, kind, out, layer):
    if trace is not None:
        n = sum(p.value.size for p in layer.params())
        trace.append((f"{kind}-{len(trace) + 1}", (-1, out.shape[2], out.shape[1]), n))


class Net:
    """The classifier ``head(embed(x))``.

    ``embed`` maps ``(batch, 3, 20)`` inputs in ``[0, 1]`` to ``(batch, 2*width)``
    latents; at the default width of 64 that is 128 dimensions.
    """

    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        if cfg.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        w = cfg.width
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        self.stem = Conv1d("stem.conv", cfg.in_channels, w, 3, 1, 1, dtype)
        self.stem_bn = BatchNorm1d("stem.bn", w, dtype=dtype)
        self.block1 = ResBlock("block1", w, w, 2, dtype)
        self.block2 = ResBlock("block2", w, 2 * w, 2, dtype)
        self.head_layer = Linear("head", 2 * w, cfg.n_classes, dtype)
        self._stem_out = None
        self._pool_len = None

    # -- parameters --

    def layers(self):
        return [self.stem, self.stem_bn, *self.block1.layers(), *self.block2.layers(), self.head_layer]

    def params(self):
        return [p for layer in self.layers() for p in layer.params()]

    def buffers(self) -> dict:
        out = {}
        for layer in self.layers():
            if isinstance(layer, BatchNorm1d):
                out.update(layer.buffers())
        return out

    @property
    def n_params(self) -> int:
        return sum(p.value.size for p in self.params())

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def state_dict(self) -> dict:
        state = {p.name: p.value.copy() for p in self.params()}
        state.update({k: v.copy() for k, v in self.buffers().items()})
        return state

    def load_state_dict(self, state: dict):
        for p in self.params():
            p.value[...] = state[p.name]
        for k, v in self.buffers().items():
            v[...] = state[k]

    # -- forward / backward --

    def _check(self, x):
        x = np.asarray(x, dtype=self.dtype)
        expected = (self.cfg.in_channels, self.cfg.seq_len)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ValueError(f"expected input of shape (batch, {expected[0]}, {expected[1]}), got {x.shape}")
        return x

    def embed(self, x, train=False, trace=None):
        x = self._check(x).transpose(0, 2, 1)
        h = self.stem.forward(x, train)
        _log(trace, "Conv1d", h, self.stem)
        h = self.stem_bn.forward(h, train)
        _log(trace, "BatchNorm1d", h, self.stem_bn)
        h = relu_forward(h)
        if train:
            self._stem_out = h
        h = self.block1.forward(h, train, trace)
        h = self.block2.forward(h, train, trace)
        self._pool_len = h.shape[1]
        z = h.mean(axis=1)
        if trace is not None:
            trace.append((f"AdaptiveAvgPool1d-{len(trace) + 1}", (-1, z.shape[1], 1), 0))
        return z

    def head(self, z, train=False):
        return self.head_layer.forward(np.asarray(z, dtype=self.dtype), train)

    def forward(self, x, train=False):
        return self.head(self.embed(x, train), train)

    def predict_logits(self, x, batch_size=4096):
        x = self._check(x)
        return np.concatenate([self.forward(x[i : i + batch_size]) for i in range(0, max(len(x), 1), batch_size)])

    def embed_batches(self, x, batch_size=4096):
        x = self._check(x)
        return np.concatenate([self.embed(x[i : i + batch_size]) for i in range(0, max(len(x), 1), batch_size)])

    def backward(self, dlogits):
        dz = self.head_layer.backward(dlogits)
        dh = np.repeat(dz[:, None, :] / self._pool_len, self._pool_len, axis=1)
        dh = self.block2.backward(dh)
        dh = self.block1.backward(dh)
        dh = relu_backward(dh, self._stem_out)
        return self.stem.backward(self.stem_bn.backward(dh)).transpose(0, 2, 1)

    def layer_table(self):
        """``(name, output shape, n_params)`` rows in the style of a model summary."""
        trace = []
        z = self.embed(np.zeros((2, self.cfg.in_channels, self.cfg.seq_len)), trace=trace)
        logits = self.head(z)
        n = self.head_layer.weight.value.size + self.head_layer.bias.value.size
        trace.append((f"Linear-{len(trace) + 1}", (-1, logits.shape[1]), n))
        return trace


def init_model(cfg: ModelConfig, seed: int = 0, dtype=np.float32) -> Net:
    """He-normal conv weights, uniform linear head, identity batch-norms."""
    net = Net(cfg, dtype)
    rng = RngStream((int(seed), 0x1417)).generator()
    for layer in net.layers():
        if isinstance(layer, (Conv1d, Linear)):
            layer.init(rng)
    return net


def expected_param_count(n_classes: int) -> int:
    return BACKBONE_PARAMS + 129 * n_classes
