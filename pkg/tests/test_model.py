import math

import numpy as np
import pytest
from oracles import LAYER_TABLE, gradcheck

from tcaug.batching import BatchPlan
from tcaug.flowdata import flow_from_arrays, make_fold
from tcaug.model.checkpoint import load_checkpoint, save_checkpoint
from tcaug.model.layers import BatchNorm1d, cross_entropy, softmax
from tcaug.model.network import ModelConfig, expected_param_count, init_model
from tcaug.model.optim import AdamW, EarlyStopping, cosine_lr
from tcaug.model.train import TrainConfig, TrainingDiverged, fit


def _hand_param_count(n_classes, w=64):
    conv = lambda ci, co, k: ci * co * k  # noqa: E731
    bn = lambda c: 2 * c  # noqa: E731
    stem = conv(3, w, 3) + bn(w)
    block1 = conv(w, w, 3) + bn(w) + conv(w, w, 3) + bn(w) + conv(w, w, 1) + bn(w)
    block2 = conv(w, 2 * w, 3) + bn(2 * w) + conv(2 * w, 2 * w, 3) + bn(2 * w) + conv(w, 2 * w, 1) + bn(2 * w)
    return stem + block1 + block2 + 2 * w * n_classes + n_classes


def test_param_count_at_20_classes():
    net = init_model(ModelConfig(20))
    assert net.n_params == 115_028 == _hand_param_count(20)


@pytest.mark.parametrize("n", [2, 5, 13, 100])
def test_param_count_formula(n):
    assert init_model(ModelConfig(n)).n_params == expected_param_count(n) == _hand_param_count(n)


def test_layer_table_matches_summary():
    assert init_model(ModelConfig(20)).layer_table() == LAYER_TABLE


def test_init_deterministic_and_seeded():
    a = init_model(ModelConfig(4), seed=3).state_dict()
    b = init_model(ModelConfig(4), seed=3).state_dict()
    c = init_model(ModelConfig(4), seed=4).state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_n_classes_validation():
    with pytest.raises(ValueError):
        init_model(ModelConfig(1))


def test_shapes_and_input_validation():
    net = init_model(ModelConfig(6))
    assert net.predict_logits(np.zeros((1, 3, 20))).shape == (1, 6)
    assert net.embed(np.zeros((7, 3, 20))).shape == (7, 128)
    with pytest.raises(ValueError):
        net.predict_logits(np.zeros((2, 20, 3)))
    with pytest.raises(ValueError):
        net.predict_logits(np.zeros((3, 20)))


def test_duplicate_rows_identical_logits():
    net = init_model(ModelConfig(3))
    x = np.random.default_rng(0).random((1, 3, 20))
    out = net.predict_logits(np.repeat(x, 4, axis=0))
    assert np.all(out == out[0])


def test_zero_params_logits_equal_head_bias():
    net = init_model(ModelConfig(5), seed=1)
    for p in net.params():
        p.value[...] = 0
    b = np.array([0.5, -1.0, 2.0, 0.0, 3.25], dtype=np.float32)
    net.head_layer.bias.value[...] = b
    out = net.predict_logits(np.random.default_rng(1).random((6, 3, 20)))
    assert np.all(out == b)


def test_head_of_embed_is_forward():
    net = init_model(ModelConfig(4), seed=2)
    x = np.random.default_rng(2).random((9, 3, 20))
    np.testing.assert_allclose(net.head(net.embed(x)), net.predict_logits(x), atol=1e-6)


def test_constant_input_constant_latent():
    net = init_model(ModelConfig(4), seed=2)
    z = net.embed(np.full((5, 3, 20), 0.3))
    assert np.all(z == z[0])


def test_batchnorm_eval_is_affine():
    bn = BatchNorm1d("bn", 4, dtype=np.float64)
    bn.running_mean[...] = [1, 2, 3, 4]
    bn.running_var[...] = [1, 4, 9, 16]
    bn.gamma.value[...] = 2.0
    x = np.random.default_rng(0).random((3, 5, 4))
    y0, y1 = bn.forward(np.zeros_like(x)), bn.forward(x)
    y2 = bn.forward(2 * x)
    np.testing.assert_allclose(y2 - y0, 2 * (y1 - y0), atol=1e-12)
    assert np.array_equal(y1, bn.forward(x))


def test_gradcheck_width8():
    assert gradcheck(n_probes=100) <= 1e-3


def test_input_gradient_matches_finite_difference():
    rng = np.random.default_rng(4)
    net = init_model(ModelConfig(3, width=8), seed=4, dtype=np.float64)
    x = rng.random((4, 3, 20))
    y = rng.integers(0, 3, 4)
    net.zero_grad()
    _, g = cross_entropy(net.forward(x, train=True), y)
    dx = net.backward(g)
    for _ in range(20):
        i = tuple(int(rng.integers(s)) for s in x.shape)
        xp, xm = x.copy(), x.copy()
        xp[i] += 1e-5
        xm[i] -= 1e-5
        num = (cross_entropy(net.forward(xp, train=True), y)[0] - cross_entropy(net.forward(xm, train=True), y)[0]) / 2e-5
        assert abs(num - dx[i]) <= 1e-3 * max(abs(num), abs(dx[i]), 1e-8)


def test_softmax_and_cross_entropy():
    z = np.random.default_rng(0).normal(size=(10, 7)) * 30
    np.testing.assert_allclose(softmax(z).sum(axis=1), 1.0, atol=1e-6)
    big = np.full((3, 4), -1e4)
    big[np.arange(3), [0, 1, 2]] = 1e4
    loss, _ = cross_entropy(big, np.array([0, 1, 2]))
    assert loss == 0.0


def test_cosine_endpoints():
    assert cosine_lr(0, 1e-3, 500) == 1e-3
    assert cosine_lr(500, 1e-3, 500) == pytest.approx(0.0, abs=1e-18)
    assert cosine_lr(250, 1e-3, 500) == pytest.approx(5e-4)


def test_adamw_zero_grad_decay():
    net = init_model(ModelConfig(3, width=8), seed=0, dtype=np.float64)
    before = {p.name: p.value.copy() for p in net.params()}
    net.zero_grad()
    AdamW(net.params(), lr=1e-3, weight_decay=1e-4).step()
    for p in net.params():
        np.testing.assert_array_equal(p.value, before[p.name] * (1 - 1e-3 * 1e-4))


def test_adamw_first_step_size():
    net = init_model(ModelConfig(3, width=8), seed=0, dtype=np.float64)
    p = net.params()[0]
    old = p.value.copy()
    for q in net.params():
        q.grad[...] = 0.0
    p.grad[...] = 0.7
    AdamW([p], lr=0.01, weight_decay=0.0).step()
    np.testing.assert_allclose(old - p.value, 0.01 * 0.7 / (0.7 + 1e-8), rtol=1e-12)


def test_early_stopping_at_best_plus_patience():
    es = EarlyStopping(0.02, 20)
    series = [50.0, 60.0, 61.0, 70.0] + [70.01] * 40
    stop = None
    for e, v in enumerate(series):
        es.update(v, e)
        if es.should_stop:
            stop = e
            break
    assert es.best_epoch == 3 and stop == 23


def test_early_stopping_min_delta_boundary():
    es = EarlyStopping(0.02, 3)
    assert es.update(10.0, 0)
    assert es.update(10.02, 1)
    assert not es.update(10.039, 2)


def _toy_split(n=120, seed=0):
    rng = np.random.default_rng(seed)
    flows = []
    for i in range(n):
        label = "ab"[i % 2]
        level = 200.0 if label == "a" else 1200.0
        flows.append(flow_from_arrays(f"t{i}", label, level + rng.normal(0, 30, 20), rng.choice([-1, 1], 20),
                                      rng.exponential(0.01, 20)))  # fmt: skip
    return make_fold(flows, 0, 0)


def test_toy_problem_learns_fast():
    split = _toy_split()
    res = fit(init_model(ModelConfig(2), seed=0), split, BatchPlan(batch_size=32), TrainConfig(max_epochs=50), seed=0)
    assert max(res.curves["val_acc"]) >= 99.0
    assert res.epochs_trained <= 50


def test_fit_deterministic_and_reports():
    split = _toy_split(60, seed=1)
    plan = BatchPlan.from_dict({"policy": "inject", "augmentation": "gaussian_noise", "batch_size": 16})
    cfg = TrainConfig(max_epochs=4)
    a = fit(init_model(ModelConfig(2), seed=5), split, plan, cfg, seed=5, run_id=3)
    b = fit(init_model(ModelConfig(2), seed=5), split, plan, cfg, seed=5, run_id=3)
    assert a.to_dict() == b.to_dict()
    assert 0 <= a.weighted_f1 <= 100
    assert sum(m["support"] for m in a.per_class.values()) == len(split.test)
    assert len(a.curves["lr"]) == a.epochs_trained == 4
    assert a.curves["lr"][0] == 1e-3


def test_fit_stops_on_patience():
    split = _toy_split(60, seed=2)
    res = fit(init_model(ModelConfig(2), seed=0), split, BatchPlan(batch_size=16),
              TrainConfig(max_epochs=200, patience=3), seed=0)  # fmt: skip
    assert res.epochs_trained == res.best_epoch + 1 + 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fit_divergence_raises():
    split = _toy_split(40, seed=3)
    with pytest.raises(TrainingDiverged):
        fit(init_model(ModelConfig(2), seed=0), split, BatchPlan(batch_size=16), TrainConfig(max_epochs=3, lr0=math.inf))


def test_fit_class_mismatch():
    with pytest.raises(ValueError, match="outputs"):
        fit(init_model(ModelConfig(3)), _toy_split(40), BatchPlan(batch_size=16), TrainConfig(max_epochs=1))


def test_checkpoint_roundtrip(tmp_path):
    net = init_model(ModelConfig(4), seed=9)
    net.stem_bn.running_mean[...] = 0.25
    save_checkpoint(net, tmp_path / "m.npz")
    back = load_checkpoint(tmp_path / "m.npz")
    x = np.random.default_rng(0).random((3, 3, 20))
    assert np.array_equal(back.predict_logits(x), net.predict_logits(x))
    assert back.cfg == net.cfg
    a, b = (tmp_path / "m.npz").read_bytes(), (tmp_path / "n.npz")
    save_checkpoint(net, b)
    assert a == b.read_bytes()
