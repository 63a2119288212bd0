"""Independent reference computations used by unit and acceptance tests."""

import itertools
import math

import numpy as np

from tcaug.model.layers import BatchNorm1d, cross_entropy
from tcaug.model.network import ModelConfig, init_model

# (layer, output shape, params) at 20 classes, as printed by a model summary
LAYER_TABLE = [
    ("Conv1d-1", (-1, 64, 20), 576),
    ("BatchNorm1d-2", (-1, 64, 20), 128),
    ("Conv1d-3", (-1, 64, 10), 12288),
    ("BatchNorm1d-4", (-1, 64, 10), 128),
    ("Conv1d-5", (-1, 64, 10), 12288),
    ("BatchNorm1d-6", (-1, 64, 10), 128),
    ("Conv1d-7", (-1, 64, 10), 4096),
    ("BatchNorm1d-8", (-1, 64, 10), 128),
    ("Conv1d-9", (-1, 128, 5), 24576),
    ("BatchNorm1d-10", (-1, 128, 5), 256),
    ("Conv1d-11", (-1, 128, 5), 49152),
    ("BatchNorm1d-12", (-1, 128, 5), 256),
    ("Conv1d-13", (-1, 128, 5), 8192),
    ("BatchNorm1d-14", (-1, 128, 5), 256),
    ("AdaptiveAvgPool1d-15", (-1, 128, 1), 0),
    ("Linear-16", (-1, 20), 2580),
]


def gradcheck(n_probes=100, width=8, batch=4, n_classes=3, seed=0, h=1e-5):
    """Max relative error between backprop and central differences.

    Probes are drawn over all parameter entries; the loss is the training-mode
    cross-entropy, so batch-norm uses batch statistics in both passes.
    """
    rng = np.random.default_rng(seed)
    net = init_model(ModelConfig(n_classes, width=width), seed=seed, dtype=np.float64)
    # move batch-norm affines and the head bias off their identity init
    for layer in net.layers():
        if isinstance(layer, BatchNorm1d):
            layer.gamma.value[...] = rng.normal(1.0, 0.3, layer.gamma.value.shape)
            layer.beta.value[...] = rng.normal(0.0, 0.3, layer.beta.value.shape)
    net.head_layer.bias.value[...] = rng.normal(0.0, 0.3, net.head_layer.bias.value.shape)
    x = rng.random((batch, 3, 20))
    y = rng.integers(0, n_classes, batch)

    def loss():
        return cross_entropy(net.forward(x, train=True), y)[0]

    net.zero_grad()
    _, g = cross_entropy(net.forward(x, train=True), y)
    net.backward(g)
    params = net.params()
    sizes = np.array([p.value.size for p in params])
    worst = 0.0
    for _ in range(n_probes):
        k = int(rng.choice(len(params), p=sizes / sizes.sum()))
        p = params[k]
        i = np.unravel_index(int(rng.integers(p.value.size)), p.value.shape)
        old = p.value[i]
        p.value[i] = old + h
        up = loss()
        p.value[i] = old - h
        down = loss()
        p.value[i] = old
        num = (up - down) / (2 * h)
        ana = p.grad[i]
        err = abs(num - ana) / max(abs(num), abs(ana), 1e-8)
        worst = max(worst, err)
    return worst


def brute_weighted_f1(y_true, y_pred):
    """Weighted F1 (percent) from an explicit confusion matrix."""
    labels = sorted(set(y_true) | set(y_pred))
    pos = {c: i for i, c in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[pos[t], pos[p]] += 1
    total = 0.0
    for i in range(len(labels)):
        tp = cm[i, i]
        col, row = cm[:, i].sum(), cm[i, :].sum()
        prec = tp / col if col else 0.0
        rec = tp / row if row else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += row * f1
    return 100.0 * total / len(y_true)


def wilcoxon_enumerate(a, b):
    """Exact two-sided Wilcoxon p by enumerating all 2^n sign patterns."""
    d = np.asarray(a, float) - np.asarray(b, float)
    d = d[d != 0]
    n = d.size
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(n)
    s = absd[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    w_plus = ranks[d > 0].sum()
    total = ranks.sum()
    stat = min(w_plus, total - w_plus)
    hits = 0
    for signs in itertools.product((0, 1), repeat=n):
        wp = float(np.dot(signs, ranks))
        if min(wp, total - wp) <= stat + 1e-9:
            hits += 1
    return stat, min(1.0, hits / 2**n)


def studentized_q(k, alpha=0.05):
    from scipy.stats import studentized_range

    return studentized_range.ppf(1 - alpha, k, np.inf) / math.sqrt(2)
