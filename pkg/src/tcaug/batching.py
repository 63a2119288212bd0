"""Mini-batch composition: Replace, Inject, Pre-augment and combiners.

An *aug_fn* here is any callable ``aug_fn(samples, rng) -> samples`` that maps
a list of flows to a list of augmented flows of the same length. Use
:func:`make_aug_fn` to build one from a single augmentation or a
:class:`Combiner`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import augment
from .augment import AugmentationSpec, Kind, Magnitude, sample_magnitude
from .flowdata import ClassStats, FlowTensor
from .rng import as_generator

POLICIES = ("noaug", "replace", "inject", "preaugment")
COMBINERS = ("ensemble", "random_stack", "masked_stack")


def _apply_one(spec: AugmentationSpec, x: FlowTensor, stats: ClassStats, rng) -> FlowTensor:
    alpha = sample_magnitude(spec.magnitude, rng)
    return augment.apply(spec.kind, x, alpha, stats, rng)


def _check_augs(augs):
    augs = tuple(augs)
    if not augs:
        raise ValueError("combiner needs at least one augmentation")
    for a in augs:
        if a.kind.pairwise:
            raise ValueError(f"{a.name} pairs samples and cannot be used inside a combiner")
    return augs


def combine_ensemble(x: FlowTensor, augs, stats: ClassStats, rng) -> FlowTensor:
    """Apply one operator picked uniformly from ``augs``."""
    augs = _check_augs(augs)
    rng = as_generator(rng)
    return _apply_one(augs[int(rng.integers(len(augs)))], x, stats, rng)


def combine_random_stack(x: FlowTensor, augs, stats: ClassStats, rng) -> FlowTensor:
    """Apply every operator once, in a per-sample random order."""
    augs = _check_augs(augs)
    rng = as_generator(rng)
    for i in rng.permutation(len(augs)):
        x = _apply_one(augs[i], x, stats, rng)
    return x


def combine_masked_stack(x: FlowTensor, augs, order, p_apply: float, stats: ClassStats, rng) -> FlowTensor:
    """Walk ``order`` and apply each operator with probability ``p_apply``.

    Draws: ``random(len(order))`` up front, then the operators' own draws.
    """
    augs = _check_augs(augs)
    if not 0.0 <= p_apply <= 1.0:
        raise ValueError(f"p_apply must lie in [0, 1], got {p_apply}")
    order = list(order)
    if sorted(order) != list(range(len(augs))):
        raise ValueError(f"order {order} is not a permutation of {len(augs)} augmentations")
    rng = as_generator(rng)
    fire = rng.random(len(order)) < p_apply
    for i, on in zip(order, fire):
        if on:
            x = _apply_one(augs[i], x, stats, rng)
    return x


@dataclass(frozen=True)
class Combiner:
    type: str
    augs: tuple
    p: float = 0.5
    order: tuple | None = None

    def __post_init__(self):
        if self.type not in COMBINERS:
            raise ValueError(f"unknown combiner {self.type!r}; expected one of {COMBINERS}")
        object.__setattr__(self, "augs", _check_augs(self.augs))
        if self.order is None:
            object.__setattr__(self, "order", tuple(range(len(self.augs))))
        elif sorted(self.order) != list(range(len(self.augs))):
            raise ValueError(f"order {self.order} is not a permutation of the augmentations")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    def apply(self, x: FlowTensor, stats: ClassStats, rng) -> FlowTensor:
        if self.type == "ensemble":
            return combine_ensemble(x, self.augs, stats, rng)
        if self.type == "random_stack":
            return combine_random_stack(x, self.augs, stats, rng)
        return combine_masked_stack(x, self.augs, self.order, self.p, stats, rng)

    @property
    def name(self) -> str:
        if self.type == "masked_stack":
            return f"masked_stack(p={self.p:g})"
        return self.type

    def to_dict(self) -> dict:
        d = {"type": self.type, "augs": [a.name for a in self.augs]}
        if self.type == "masked_stack":
            d["p"] = self.p
            d["order"] = list(self.order)
        return d

    @classmethod
    def from_dict(cls, d: dict, magnitude=None) -> "Combiner":
        mag = Magnitude.parse(d.get("magnitude", magnitude))
        augs = tuple(AugmentationSpec.from_name(n, mag) for n in d["augs"])
        order = d.get("order")
        return cls(d["type"], augs, float(d.get("p", 0.5)), None if order is None else tuple(order))


def order_by_rank(names, mean_ranks: dict) -> list[str]:
    """Best (lowest mean rank) first; the MaskedStack default order."""
    return sorted(names, key=lambda n: (mean_ranks[n], n))


def make_aug_fn(aug, stats: ClassStats):
    """Batch-level augmentation callable for an AugmentationSpec or Combiner.

    For CutMix the batch is paired by a random permutation; with an odd count
    the leftover sample borrows a random partner and only its own output is
    kept. A single-sample batch is returned unchanged.
    """
    if isinstance(aug, Combiner):

        def combined(samples, rng):
            rng = as_generator(rng)
            return [aug.apply(x, stats, rng) for x in samples]

        return combined

    if aug.kind.pairwise:

        def paired(samples, rng):
            rng = as_generator(rng)
            n = len(samples)
            out = list(samples)
            if n < 2:
                return out
            perm = rng.permutation(n)
            for a, b in zip(perm[0::2], perm[1::2]):
                alpha = sample_magnitude(aug.magnitude, rng)
                out[a], out[b] = augment.apply_pair(aug.kind, samples[a], samples[b], alpha, stats, rng)
            if n % 2:
                last = int(perm[-1])
                other = int(perm[int(rng.integers(n - 1))])
                alpha = sample_magnitude(aug.magnitude, rng)
                out[last], _ = augment.apply_pair(aug.kind, samples[last], samples[other], alpha, stats, rng)
            return out

        return paired

    def single(samples, rng):
        rng = as_generator(rng)
        return [_apply_one(aug, x, stats, rng) for x in samples]

    return single


def _tag(x: FlowTensor, suffix: str) -> FlowTensor:
    return x.replace(flow_id=f"{x.flow_id}~{suffix}")


def compose_replace(batch, p_replace: float, aug_fn, rng) -> list:
    """Replace each sample by its augmentation with probability ``p_replace``.

    Draws: ``random(len(batch))``, then ``aug_fn`` on the selected samples.
    """
    if not 0.0 <= p_replace <= 1.0:
        raise ValueError(f"P_replace must lie in [0, 1], got {p_replace}")
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    rng = as_generator(rng)
    sel = np.flatnonzero(rng.random(len(batch)) < p_replace)
    if sel.size == 0:
        return batch
    augmented = aug_fn([batch[i] for i in sel], rng)
    for i, x in zip(sel, augmented):
        batch[i] = _tag(x, "r")
    return batch


def compose_inject(batch, n_inject: int, aug_fn, rng) -> list:
    """Originals followed by ``n_inject`` augmented copies of the batch."""
    if n_inject < 1:
        raise ValueError(f"N_inject must be >= 1, got {n_inject}")
    batch = list(batch)
    if not batch:
        raise ValueError("empty batch")
    rng = as_generator(rng)
    out = list(batch)
    for k in range(1, n_inject + 1):
        out.extend(_tag(x, f"a{k}") for x in aug_fn(batch, rng))
    return out


def preaugment_dataset(train, factor: int, aug_fn, rng) -> list:
    """Materialize ``factor`` augmented copies of the training set up front."""
    if factor < 1:
        raise ValueError(f"pre-augment factor must be >= 1, got {factor}")
    train = list(train)
    rng = as_generator(rng)
    out = list(train)
    for k in range(1, factor + 1):
        out.extend(_tag(x, f"p{k}") for x in aug_fn(train, rng))
    return out


def weighted_sampler_indices(labels, n_draws: int, rng) -> np.ndarray:
    """I.i.d. indices with ``P(i)`` inversely proportional to its class size."""
    labels = np.asarray(list(labels))
    if labels.size == 0:
        raise ValueError("no labels to sample from")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    w = 1.0 / counts[inverse]
    return as_generator(rng).choice(labels.size, size=int(n_draws), replace=True, p=w / w.sum())


@dataclass(frozen=True)
class BatchPlan:
    """How training batches are composed.

    ``batch_size`` is the number of samples seen per training step; with
    Inject the number of originals per step is ``batch_size // (1 + n_inject)``.
    """

    policy: str = "noaug"
    p_replace: float = 0.5
    n_inject: int = 1
    factor: int = 10
    augmentation: AugmentationSpec | None = None
    combiner: Combiner | None = None
    class_weighted: bool = False
    batch_size: int = 1024
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.policy == "replace" and not 0.0 <= self.p_replace <= 1.0:
            raise ValueError(f"P_replace must lie in [0, 1], got {self.p_replace}")
        if self.policy == "inject":
            if self.n_inject < 1:
                raise ValueError(f"N_inject must be >= 1, got {self.n_inject}")
            if self.batch_size < 1 + self.n_inject:
                raise ValueError("batch_size too small for the injection factor")
        if self.policy == "preaugment" and self.factor < 1:
            raise ValueError(f"pre-augment factor must be >= 1, got {self.factor}")
        if self.augmentation is not None and self.combiner is not None:
            raise ValueError("give either an augmentation or a combiner, not both")
        if self.policy != "noaug" and self.augmenter is None:
            raise ValueError(f"policy {self.policy!r} needs an augmentation or a combiner")

    @property
    def augmenter(self):
        return self.combiner if self.combiner is not None else self.augmentation

    @property
    def originals_per_step(self) -> int:
        if self.policy == "inject":
            return self.batch_size // (1 + self.n_inject)
        return self.batch_size

    @property
    def aug_name(self) -> str:
        if self.policy == "noaug":
            return "none"
        if self.combiner is not None:
            return self.combiner.name
        return self.augmentation.name

    def with_augmenter(self, aug) -> "BatchPlan":
        comb = aug if isinstance(aug, Combiner) else None
        spec = None if comb is not None else aug
        return BatchPlan(
            self.policy, self.p_replace, self.n_inject, self.factor, spec, comb,
            self.class_weighted, self.batch_size,
        )

    def baseline(self) -> "BatchPlan":
        """The NoAug plan with the same per-step batch size and sampler."""
        return BatchPlan("noaug", class_weighted=self.class_weighted, batch_size=self.batch_size)

    def to_dict(self) -> dict:
        d = {"policy": self.policy}
        if self.policy == "replace":
            d["p_replace"] = self.p_replace
        elif self.policy == "inject":
            d["n_inject"] = self.n_inject
        elif self.policy == "preaugment":
            d["factor"] = self.factor
        if self.augmentation is not None:
            d["augmentation"] = self.augmentation.name
            d["magnitude"] = self.augmentation.magnitude.describe()
        if self.combiner is not None:
            d["combiner"] = self.combiner.to_dict()
            d["magnitude"] = self.combiner.augs[0].magnitude.describe()
        d["class_weighted"] = self.class_weighted
        d["batch_size"] = self.batch_size
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BatchPlan":
        d = dict(d)
        mag = d.get("magnitude")
        spec = AugmentationSpec.from_name(d["augmentation"], mag) if d.get("augmentation") else None
        comb = Combiner.from_dict(d["combiner"], mag) if d.get("combiner") else None
        return cls(
            policy=d.get("policy", "noaug"),
            p_replace=float(d.get("p_replace", 0.5)),
            n_inject=int(d.get("n_inject", 1)),
            factor=int(d.get("factor", 10)),
            augmentation=spec,
            combiner=comb,
            class_weighted=bool(d.get("class_weighted", False)),
            batch_size=int(d.get("batch_size", 1024)),
        )


def compose_step(batch, plan: BatchPlan, aug_fn, rng) -> list:
    """Apply the plan's per-step policy to one batch of originals."""
    if plan.policy == "replace":
        return compose_replace(batch, plan.p_replace, aug_fn, rng)
    if plan.policy == "inject":
        return compose_inject(batch, plan.n_inject, aug_fn, rng)
    return list(batch)


__all__ = [
    "BatchPlan",
    "Combiner",
    "Kind",
    "combine_ensemble",
    "combine_masked_stack",
    "combine_random_stack",
    "compose_inject",
    "compose_replace",
    "compose_step",
    "make_aug_fn",
    "order_by_rank",
    "preaugment_dataset",
    "weighted_sampler_indices",
]
