"""Training loop, evaluation and run results."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..batching import BatchPlan, compose_step, make_aug_fn, preaugment_dataset, weighted_sampler_indices
from ..flowdata import DatasetSplit, compute_class_stats, normalize_values, stack_values
from ..rng import RngStream
from .layers import cross_entropy
from .metrics import accuracy, per_class_metrics, weighted_f1
from .network import Net
from .optim import AdamW, EarlyStopping, cosine_lr

log = logging.getLogger(__name__)

# index component of the stream key reserved for whole-run draws
_PREAUG_STREAM = 0x7FFF_0001
_LATENT_STREAM = 0x7FFF_0002


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    lr0: float = 1e-3
    weight_decay: float = 1e-4
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    min_delta: float = 0.02
    patience: int = 20

    @classmethod
    def from_dict(cls, d: dict | None) -> "TrainConfig":
        d = dict(d or {})
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class RunResult:
    aug_name: str
    weighted_f1: float
    accuracy: float
    per_class: dict
    epochs_trained: int
    best_epoch: int
    best_val_acc: float
    curves: dict
    classes: list
    n_train: int
    plan: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    latents: dict | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "latents"}
        d["per_class"] = {str(k): v for k, v in self.per_class.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        d = dict(d)
        d.pop("latents", None)
        return cls(**d)


def _encode(flows, class_index, q_iat_99):
    x = normalize_values(stack_values(flows), q_iat_99).astype(np.float32)
    y = np.array([class_index[f.label] for f in flows], dtype=np.int64)
    return x, y


def evaluate(model: Net, x, y, classes) -> dict:
    pred = model.predict_logits(x).argmax(axis=1)
    names = [classes[i] for i in y]
    pred_names = [classes[i] for i in pred]
    pc = per_class_metrics(names, pred_names, classes)
    return {"weighted_f1": weighted_f1(names, pred_names), "accuracy": accuracy(y, pred), "per_class": pc}


def fit(
    model: Net,
    split: DatasetSplit,
    plan: BatchPlan,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    run_id: int = 0,
    keep_latents: bool = False,
    n_latent_augs: int = 5,
) -> RunResult:
    """Train ``model`` in place on ``split`` and evaluate the best-validation checkpoint on test.

    Stream keys: the epoch shuffle uses ``(seed, run_id, epoch + 1, 0)`` and
    step ``s`` of that epoch composes its batch from ``(seed, run_id, epoch + 1,
    s + 1)``, so runs are bitwise reproducible.
    """
    classes = split.classes
    if len(classes) != model.cfg.n_classes:
        raise ValueError(f"model has {model.cfg.n_classes} outputs but the split has {len(classes)} classes")
    class_index = {c: i for i, c in enumerate(classes)}
    stats = compute_class_stats(list(split.train) + list(split.val))
    q = stats.q_iat_99
    x_val, y_val = _encode(split.val, class_index, q)
    x_test, y_test = _encode(split.test, class_index, q)

    aug_fn = make_aug_fn(plan.augmenter, stats) if plan.policy != "noaug" else None
    pool = list(split.train)
    if plan.policy == "preaugment":
        pool = preaugment_dataset(pool, plan.factor, aug_fn, RngStream((seed, run_id, 0, _PREAUG_STREAM)))
    pool_labels = [f.label for f in pool]

    opt = AdamW(model.params(), train_cfg.lr0, train_cfg.betas, train_cfg.eps, train_cfg.weight_decay)
    stopper = EarlyStopping(train_cfg.min_delta, train_cfg.patience)
    per_step = plan.originals_per_step
    curves = {"train_loss": [], "val_acc": [], "lr": []}
    best_state = model.state_dict()
    epochs = 0
    for epoch in range(train_cfg.max_epochs):
        lr = cosine_lr(epoch, train_cfg.lr0, train_cfg.max_epochs)
        opt.lr = lr
        rng = RngStream((seed, run_id, epoch + 1, 0)).generator()
        if plan.class_weighted:
            order = weighted_sampler_indices(pool_labels, len(pool), rng)
        else:
            order = rng.permutation(len(pool))
        losses = []
        for step, start in enumerate(range(0, len(order), per_step)):
            idx = order[start : start + per_step]
            if len(idx) < 2:
                continue  # batch-norm needs two samples
            batch = [pool[i] for i in idx]
            if aug_fn is not None:
                batch = compose_step(batch, plan, aug_fn, RngStream((seed, run_id, epoch + 1, step + 1)))
            x, y = _encode(batch, class_index, q)
            model.zero_grad()
            loss, grad = cross_entropy(model.forward(x, train=True), y)
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch}, step {step} (lr={lr:.3g})")
            model.backward(grad)
            opt.step()
            losses.append(loss)
        epochs = epoch + 1
        val_acc = accuracy(y_val, model.predict_logits(x_val).argmax(axis=1))
        curves["train_loss"].append(float(np.mean(losses)) if losses else float("nan"))
        curves["val_acc"].append(val_acc)
        curves["lr"].append(lr)
        if stopper.update(val_acc, epoch):
            best_state = model.state_dict()
        log.debug("epoch %d loss %.4f val_acc %.2f", epoch, curves["train_loss"][-1], val_acc)
        if stopper.should_stop:
            break

    model.load_state_dict(best_state)
    ev = evaluate(model, x_test, y_test, classes)
    result = RunResult(
        aug_name=plan.aug_name,
        weighted_f1=ev["weighted_f1"],
        accuracy=ev["accuracy"],
        per_class=ev["per_class"],
        epochs_trained=epochs,
        best_epoch=stopper.best_epoch,
        best_val_acc=stopper.best,
        curves=curves,
        classes=list(classes),
        n_train=len(split.train),
        plan=plan.to_dict(),
        meta={"seed": int(seed), "run_id": int(run_id), "fold": list(split.seed)},
    )
    if keep_latents:
        result.latents = extract_latents(model, split, plan, stats, class_index, seed, run_id, n_latent_augs)
    return result


def extract_latents(model, split, plan, stats, class_index, seed, run_id, n_augs=5) -> dict:
    """Latents of train, test and ``n_augs`` augmentations of every train sample.

    ``aug`` rows are ordered copy-major: copy ``k`` of train sample ``i`` sits
    at row ``k * n_train + i``. Without an augmenter the copies are the
    originals themselves.
    """
    q = stats.q_iat_99
    x_tr, y_tr = _encode(split.train, class_index, q)
    x_te, y_te = _encode(split.test, class_index, q)
    z_tr = model.embed_batches(x_tr)
    if plan.augmenter is not None:
        aug_fn = make_aug_fn(plan.augmenter, stats)
        rng = RngStream((seed, run_id, 0, _LATENT_STREAM)).generator()
        copies = [f for _ in range(n_augs) for f in aug_fn(split.train, rng)]
        x_aug, _ = _encode(copies, class_index, q)
        z_aug = model.embed_batches(x_aug)
    else:
        z_aug = np.tile(z_tr, (n_augs, 1))
    return {
        "train": z_tr.astype(np.float64),
        "train_labels": y_tr,
        "aug": z_aug.astype(np.float64),
        "aug_labels": np.tile(y_tr, n_augs),
        "test": model.embed_batches(x_te).astype(np.float64),
        "test_labels": y_te,
    }
