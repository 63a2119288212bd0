"""Flow records: data model, ingestion, curation, folds, statistics, scaling.

A flow is stored in the raw domain as a ``(3, T)`` float array whose rows are
packet size (bytes), direction (-1/+1) and inter-arrival time (seconds) of the
first ``T = 20`` packets, zero padded at the tail.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import RngStream

T = 20
D = 3
SIZE, DIR, IAT = 0, 1, 2
FEATURES = ("size", "dir", "iat")
MAX_SIZE = 1460.0
MIN_IAT = 1e-7


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True, eq=False)
class FlowTensor:
    """One flow: ``values[d, t]`` plus its label and non-padded length."""

    flow_id: str
    label: str
    values: np.ndarray
    valid_len: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (D, T):
            raise DataError(f"flow {self.flow_id!r}: values must be {D}x{T}, got {values.shape}")
        if not 1 <= self.valid_len <= T:
            raise DataError(f"flow {self.flow_id!r}: valid_len {self.valid_len} outside [1, {T}]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_len", int(self.valid_len))

    def replace(self, values=None, valid_len=None, flow_id=None) -> "FlowTensor":
        return FlowTensor(
            self.flow_id if flow_id is None else flow_id,
            self.label,
            self.values if values is None else values,
            self.valid_len if valid_len is None else valid_len,
        )

    def to_record(self) -> dict:
        n = self.valid_len
        return {
            "flow_id": self.flow_id,
            "label": self.label,
            "pkt_size": self.values[SIZE, :n].tolist(),
            "dir": self.values[DIR, :n].tolist(),
            "iat": self.values[IAT, :n].tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, FlowTensor):
            return NotImplemented
        return (
            self.flow_id == other.flow_id
            and self.label == other.label
            and self.valid_len == other.valid_len
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def flow_from_arrays(flow_id, label, pkt_size, direction, iat) -> FlowTensor:
    """Build a raw-domain flow, truncating/padding to ``T`` packets.

    Sizes are clipped to ``[0, 1460]``, directions coerced to their sign
    (non-negative entries become +1), IATs floored at 0 and the IAT of the
    first packet forced to 0.
    """
    size = np.asarray(pkt_size, dtype=np.float64).ravel()
    dirs = np.asarray(direction, dtype=np.float64).ravel()
    iats = np.asarray(iat, dtype=np.float64).ravel()
    if not (len(size) == len(dirs) == len(iats)):
        raise DataError(
            f"flow {flow_id!r}: inconsistent array lengths "
            f"(pkt_size={len(size)}, dir={len(dirs)}, iat={len(iats)})"
        )
    if len(size) == 0:
        raise DataError(f"flow {flow_id!r}: no packets")
    n = min(len(size), T)
    values = np.zeros((D, T))
    values[SIZE, :n] = np.clip(size[:n], 0.0, MAX_SIZE)
    values[DIR, :n] = np.where(dirs[:n] < 0, -1.0, 1.0)
    values[IAT, :n] = np.maximum(iats[:n], 0.0)
    values[IAT, 0] = 0.0
    return FlowTensor(str(flow_id), str(label), values, n)


def ingest_jsonl(path) -> list[FlowTensor]:
    """Read a JSON Lines flow dataset."""
    flows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            missing = {"flow_id", "label", "pkt_size", "dir", "iat"} - rec.keys()
            if missing:
                raise DataError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            try:
                flows.append(
                    flow_from_arrays(rec["flow_id"], rec["label"], rec["pkt_size"], rec["dir"], rec["iat"])
                )
            except (DataError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return flows


def write_jsonl(flows, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in flows:
            fh.write(json.dumps(f.to_record()) + "\n")


def curate(flows, min_pkts: int = 10) -> list[FlowTensor]:
    """Keep flows with strictly more than ``min_pkts`` packets."""
    kept = [f for f in flows if f.valid_len > min_pkts]
    if not kept:
        raise DataError("no flows survive curation")
    return kept


def class_counts(flows) -> dict[str, int]:
    return dict(sorted(Counter(f.label for f in flows).items()))


def imbalance_ratio(flows) -> float:
    """Max over min number of flows per class."""
    counts = class_counts(flows).values()
    return max(counts) / min(counts)


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    val: list
    test: list
    seed: tuple = ()

    @property
    def classes(self) -> list[str]:
        return sorted({f.label for f in self.train})


def _split_counts(n: int) -> tuple[int, int, int]:
    n_train = int(round(0.70 * n))
    n_val = int(round(0.15 * n))
    n_val = min(n_val, n - n_train - 1)
    return n_train, n_val, n - n_train - n_val


def make_fold(flows, seed: int, index: int) -> DatasetSplit:
    """Stratified 70/15/15 split number ``index`` of the fold family ``seed``."""
    by_class: dict[str, list[int]] = {}
    for i, f in enumerate(flows):
        by_class.setdefault(f.label, []).append(i)
    rng = RngStream((int(seed), int(index))).generator()
    tr, va, te = [], [], []
    for label in sorted(by_class):
        idx = np.asarray(by_class[label])
        if len(idx) < 3:
            raise DataError(f"class {label!r} has {len(idx)} flows; at least 3 are needed to stratify")
        idx = idx[rng.permutation(len(idx))]
        a, b, _ = _split_counts(len(idx))
        tr.extend(idx[:a])
        va.extend(idx[a : a + b])
        te.extend(idx[a + b :])
    pick = lambda ids: [flows[i] for i in sorted(ids)]  # noqa: E731
    return DatasetSplit(pick(tr), pick(va), pick(te), (int(seed), int(index)))


def make_folds(flows, n_folds: int = 80, seed: int = 0) -> list[DatasetSplit]:
    return [make_fold(flows, seed, i) for i in range(n_folds)]


@dataclass
class ClassStats:
    """Per-class statistics over raw clipped values.

    ``per_coord_*[label]`` are ``(3, T)`` arrays, ``global_*[label]`` are
    length-3 arrays (one entry per feature, over all time steps flattened).
    Standard deviations are population (``ddof=0``) values.
    """

    per_coord_mean: dict = field(default_factory=dict)
    per_coord_std: dict = field(default_factory=dict)
    global_mean: dict = field(default_factory=dict)
    global_std: dict = field(default_factory=dict)
    q_iat_99: float = 1.0

    @property
    def classes(self) -> list[str]:
        return sorted(self.per_coord_std)

    def to_dict(self) -> dict:
        enc = lambda m: {k: np.asarray(v).tolist() for k, v in sorted(m.items())}  # noqa: E731
        return {
            "q_iat_99": float(self.q_iat_99),
            "per_coord_mean": enc(self.per_coord_mean),
            "per_coord_std": enc(self.per_coord_std),
            "global_mean": enc(self.global_mean),
            "global_std": enc(self.global_std),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassStats":
        dec = lambda m: {k: np.asarray(v, dtype=np.float64) for k, v in m.items()}  # noqa: E731
        return cls(
            dec(d["per_coord_mean"]),
            dec(d["per_coord_std"]),
            dec(d["global_mean"]),
            dec(d["global_std"]),
            float(d["q_iat_99"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ClassStats":
        return cls.from_dict(json.loads(Path(path).read_text()))


def nearest_rank_percentile(values, pct: float) -> float:
    """Smallest value with at least ``pct`` percent of the data at or below it."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise DataError("percentile of an empty array")
    # round away float noise before the ceiling, e.g. 0.99 * 300
    rank = max(1, math.ceil(round(pct / 100.0 * v.size, 9)))
    return float(v[rank - 1])


def compute_class_stats(train_plus_val) -> ClassStats:
    flows = list(train_plus_val)
    if not flows:
        raise DataError("cannot compute statistics of an empty dataset")
    stats = ClassStats()
    by_class: dict[str, list[np.ndarray]] = {}
    for f in flows:
        by_class.setdefault(f.label, []).append(f.values)
    for label, vals in sorted(by_class.items()):
        if len(vals) < 2:
            raise DataError(f"class {label!r} has a single flow; its std is undefined")
        arr = np.stack(vals)
        stats.per_coord_mean[label] = arr.mean(axis=0)
        stats.per_coord_std[label] = arr.std(axis=0)
        flat = arr.transpose(1, 0, 2).reshape(D, -1)
        stats.global_mean[label] = flat.mean(axis=1)
        stats.global_std[label] = flat.std(axis=1)
    # pooled over real (non-padded) packets only
    iats = np.concatenate([f.values[IAT, : f.valid_len] for f in flows])
    stats.q_iat_99 = nearest_rank_percentile(iats, 99.0)
    return stats


def _iat_bounds(q_iat_99: float) -> tuple[float, float]:
    if not q_iat_99 > MIN_IAT:
        raise DataError(f"q_iat_99={q_iat_99} must exceed {MIN_IAT}")
    return math.log10(MIN_IAT), math.log10(q_iat_99)


def normalize_values(values: np.ndarray, q_iat_99: float) -> np.ndarray:
    """Vectorized scaling of ``(..., 3, T)`` raw arrays into ``[0, 1]``."""
    lo, hi = _iat_bounds(q_iat_99)
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    out[..., SIZE, :] = np.clip(values[..., SIZE, :], 0.0, MAX_SIZE) / MAX_SIZE
    out[..., DIR, :] = np.clip((values[..., DIR, :] + 1.0) * 0.5, 0.0, 1.0)
    iat = np.log10(np.clip(values[..., IAT, :], MIN_IAT, q_iat_99))
    out[..., IAT, :] = np.clip((iat - lo) / (hi - lo), 0.0, 1.0)
    return out


def normalize(x: FlowTensor, stats: ClassStats) -> np.ndarray:
    return normalize_values(x.values, stats.q_iat_99)


def stack_values(flows) -> np.ndarray:
    return np.stack([f.values for f in flows]) if flows else np.zeros((0, D, T))


def synth_generate(
    n_classes: int,
    flows_per_class,
    seed: int = 0,
    jitter: float = 1.0,
    min_len: int = 11,
    max_len: int = T,
) -> list[FlowTensor]:
    """Seeded synthetic flows with class-specific templates.

    Each class draws a template once: piecewise-constant packet-size levels,
    an alternating-burst direction pattern and a log-normal IAT scale. Flows
    then add per-flow jitter scaled by ``jitter`` (0 gives identical flows
    within a class, all of length ``max_len``).
    """
    if n_classes < 2:
        raise DataError("n_classes must be >= 2")
    counts = list(flows_per_class)
    if len(counts) != n_classes:
        raise DataError(f"flows_per_class has {len(counts)} entries for {n_classes} classes")
    if not 1 <= min_len <= max_len <= T:
        raise DataError(f"need 1 <= min_len <= max_len <= {T}")
    rng = RngStream((int(seed), 0x5EED)).generator()
    width = len(str(n_classes - 1))
    flows = []
    for c in range(n_classes):
        n_seg = int(rng.integers(2, 5))
        cuts = np.sort(rng.choice(np.arange(1, T), n_seg - 1, replace=False))
        levels = rng.uniform(60.0, 1400.0, n_seg)
        size_tpl = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [T]])))
        burst = int(rng.integers(1, 5))
        start = 1.0 if rng.random() < 0.5 else -1.0
        dir_tpl = np.array([start if (t // burst) % 2 == 0 else -start for t in range(T)])
        log_mu = rng.uniform(-4.0, -0.5)
        iat_tpl = np.exp(log_mu + 0.3 * rng.standard_normal(T))
        label = f"class_{c:0{width}d}"
        for i in range(counts[c]):
            n = int(rng.integers(min_len, max_len + 1)) if jitter > 0 else max_len
            size = size_tpl * np.exp(0.25 * jitter * rng.standard_normal(T))
            size = size + 40.0 * jitter * rng.standard_normal(T)
            flip = rng.random(T) < 0.08 * min(jitter, 1.0)
            dirs = np.where(flip, -dir_tpl, dir_tpl)
            iat = iat_tpl * np.exp(0.6 * jitter * rng.standard_normal(T))
            flows.append(flow_from_arrays(f"{label}-{i:05d}", label, size[:n], dirs[:n], iat[:n]))
    return flows
