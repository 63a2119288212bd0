"""Layer primitives with explicit forward/backward passes.

Tensors are channels-last, ``(batch, length, channels)``, which keeps the
batch-norm reductions and the im2col matmuls contiguous. Weights still use
the ``(out, in, kernel)`` convention. Each layer keeps the
cache of its last training-mode forward call, so ``backward`` must be called
in reverse order on the same batch.
"""

from __future__ import annotations

import numpy as np


class Param:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)


class Conv1d:
    """1-d convolution without bias, computed through im2col."""

    def __init__(self, name, c_in, c_out, kernel, stride=1, padding=0, dtype=np.float32):
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.stride, self.padding = stride, padding
        self.weight = Param(f"{name}.weight", np.zeros((c_out, c_in, kernel), dtype=dtype))
        self._cache = None

    def params(self):
        return [self.weight]

    def out_len(self, length: int) -> int:
        return (length + 2 * self.padding - self.kernel) // self.stride + 1

    def init(self, rng):
        fan_in = self.c_in * self.kernel
        w = rng.standard_normal(self.weight.value.shape) * np.sqrt(2.0 / fan_in)
        self.weight.value[...] = w

    def forward(self, x, train=False):
        b, length, c = x.shape
        if c != self.c_in:
            raise ValueError(f"{self.weight.name}: expected {self.c_in} input channels, got {c}")
        p, s, k = self.padding, self.stride, self.kernel
        xp = np.pad(x, ((0, 0), (p, p), (0, 0))) if p else x
        lo = self.out_len(length)
        span = s * (lo - 1) + 1
        if k == 1:
            cols = xp[:, 0:span:s, :].reshape(b * lo, c)
        else:
            cols = np.concatenate([xp[:, j : j + span : s, :] for j in range(k)], axis=2).reshape(b * lo, k * c)
        out = (cols @ self._wmat().T).reshape(b, lo, self.c_out)
        if train:
            self._cache = (cols, x.shape, lo)
        return out

    def _wmat(self):
        return self.weight.value.transpose(0, 2, 1).reshape(self.c_out, self.kernel * self.c_in)

    def backward(self, dout):
        cols, (b, length, c), lo = self._cache
        p, s, k = self.padding, self.stride, self.kernel
        d2 = dout.reshape(b * lo, self.c_out)
        gw = (d2.T @ cols).reshape(self.c_out, k, c).transpose(0, 2, 1)
        self.weight.grad += gw
        dcols = (d2 @ self._wmat()).reshape(b, lo, k, c)
        span = s * (lo - 1) + 1
        if k == 1 and p == 0:
            if s == 1:
                return dcols[:, :, 0, :]
            dx = np.zeros((b, length, c), dtype=dout.dtype)
            dx[:, 0:span:s, :] = dcols[:, :, 0, :]
            return dx
        dxp = np.zeros((b, length + 2 * p, c), dtype=dout.dtype)
        for j in range(k):
            dxp[:, j : j + span : s, :] += dcols[:, :, j, :]
        return dxp[:, p : p + length, :] if p else dxp


class BatchNorm1d:
    """Batch normalization over batch and length axes."""

    def __init__(self, name, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.momentum, self.eps = momentum, eps
        self.gamma = Param(f"{name}.weight", np.ones(channels, dtype=dtype))
        self.beta = Param(f"{name}.bias", np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.name = name
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {f"{self.name}.running_mean": self.running_mean, f"{self.name}.running_var": self.running_var}

    def forward(self, x, train=False):
        g, bta = self.gamma.value, self.beta.value
        if not train:
            scale = g / np.sqrt(self.running_var + self.eps)
            return x * scale + (bta - self.running_mean * scale)
        c = x.shape[-1]
        x2 = x.reshape(-1, c)
        n = x2.shape[0]
        mean = x2.mean(axis=0)
        xc = x2 - mean
        var = np.einsum("ij,ij->j", xc, xc) / n
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = xc * inv
        m = self.momentum
        self.running_mean[...] = (1 - m) * self.running_mean + m * mean
        unbiased = var * (n / (n - 1)) if n > 1 else var
        self.running_var[...] = (1 - m) * self.running_var + m * unbiased
        self._cache = (xhat, inv, n)
        return (xhat * g + bta).reshape(x.shape)

    def backward(self, dout):
        xhat, inv, n = self._cache
        d2 = dout.reshape(-1, xhat.shape[1])
        s2 = np.einsum("ij,ij->j", d2, xhat)
        s1 = d2.sum(axis=0)
        self.gamma.grad += s2
        self.beta.grad += s1
        g = self.gamma.value
        dx = (g * inv / n) * (n * d2 - s1 - xhat * s2)
        return dx.reshape(dout.shape)


class Linear:
    def __init__(self, name, n_in, n_out, dtype=np.float32):
        self.n_in, self.n_out = n_in, n_out
        self.weight = Param(f"{name}.weight", np.zeros((n_out, n_in), dtype=dtype))
        self.bias = Param(f"{name}.bias", np.zeros(n_out, dtype=dtype))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def init(self, rng):
        bound = 1.0 / np.sqrt(self.n_in)
        self.weight.value[...] = rng.uniform(-bound, bound, self.weight.value.shape)
        self.bias.value[...] = rng.uniform(-bound, bound, self.n_out)

    def forward(self, x, train=False):
        if train:
            self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dout):
        self.weight.grad += dout.T @ self._x
        self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.value


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(dout, y):
    return dout * (y > 0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, y):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    logits = np.asarray(logits)
    b = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(b), y].mean()
    grad = np.exp(logp)
    grad[np.arange(b), y] -= 1.0
    return float(loss), grad / b
