"""AdamW with decoupled weight decay, cosine annealing and early stopping."""

from __future__ import annotations

import math

import numpy as np


class AdamW:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            # decay first, on the pre-update value
            p.value *= 1.0 - self.lr * self.weight_decay
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)


def cosine_lr(epoch: int, lr0: float, max_epochs: int) -> float:
    """``0.5 lr0 (1 + cos(pi epoch / max_epochs))``."""
    return 0.5 * lr0 * (1.0 + math.cos(math.pi * epoch / max_epochs))


class EarlyStopping:
    """Stop when the monitored value has not improved by ``min_delta`` for ``patience`` epochs."""

    def __init__(self, min_delta=0.02, patience=20):
        self.min_delta = min_delta
        self.patience = patience
        self.best = -math.inf
        self.best_epoch = -1
        self.wait = 0

    def update(self, value: float, epoch: int) -> bool:
        """Record ``value`` for ``epoch``; True when it is a new best."""
        if value >= self.best + self.min_delta:
            self.best, self.best_epoch, self.wait = value, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.wait >= self.patience
