"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .augment import CATALOG, AugmentationSpec, Magnitude
from .batching import BatchPlan, Combiner
from .flowdata import curate, ingest_jsonl, synth_generate
from .model.train import TrainConfig


class ConfigError(ValueError):
    pass


DEFAULT_PLAN = {"policy": "inject", "n_inject": 1, "class_weighted": False, "batch_size": 1024}


@dataclass
class RunConfig:
    """Everything a training run or benchmark grid needs.

    ``dataset`` holds either ``{"path": ...}`` (flows JSONL) or
    ``{"synth": {...}}`` (keyword arguments of ``synth_generate``).
    ``augmentations`` lists catalog names, combiner dicts, or the string
    ``"all"`` for the full catalog.
    """

    dataset: dict = field(default_factory=lambda: {"synth": {"n_classes": 5, "flows_per_class": 400, "seed": 7}})
    min_pkts: int = 10
    n_folds: int = 5
    fold_seed: int = 0
    augmentations: list | str = "all"
    magnitude: str | float = "uniform"
    plan: dict = field(default_factory=lambda: dict(DEFAULT_PLAN))
    train: dict = field(default_factory=dict)
    width: int = 64
    latents: bool = False
    n_latent_augs: int = 5
    master_seed: int = 0

    # -- construction --

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def validate(self):
        if not isinstance(self.dataset, dict) or len(set(self.dataset) & {"path", "synth"}) != 1:
            raise ConfigError("dataset needs exactly one of 'path' or 'synth'")
        if self.n_folds < 1:
            raise ConfigError("n_folds must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must fit in an unsigned 64-bit integer")
        try:
            Magnitude.parse(self.magnitude)
            self.augmenters()
            self.base_plan()
            self.train_config()
        except (ValueError, KeyError, TypeError) as e:
            raise ConfigError(str(e)) from e

    # -- resolved views --

    def magnitude_obj(self) -> Magnitude:
        return Magnitude.parse(self.magnitude)

    def augmenters(self) -> list:
        """``AugmentationSpec`` / ``Combiner`` objects in grid order."""
        names = list(CATALOG) if self.augmentations == "all" else self.augmentations
        if isinstance(names, str):
            raise ConfigError(f"augmentations must be a list or 'all', got {names!r}")
        out = []
        for entry in names:
            if isinstance(entry, dict):
                out.append(Combiner.from_dict(entry, self.magnitude))
            elif entry in CATALOG:
                out.append(AugmentationSpec.from_name(entry, self.magnitude))
            else:
                raise ConfigError(f"unknown augmentation {entry!r}; known: {', '.join(CATALOG)}")
        labels = [a.name for a in out]
        if len(set(labels)) != len(labels):
            raise ConfigError("augmentations contain duplicates")
        return out

    def base_plan(self) -> BatchPlan:
        d = dict(self.plan)
        if d.get("policy", "noaug") == "noaug":
            return BatchPlan.from_dict(d)
        # validate with a stand-in augmentation, the grid substitutes its own
        if not d.get("combiner"):
            d.setdefault("augmentation", "gaussian_noise")
        return BatchPlan.from_dict(d)

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.train)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def load_flows(self) -> list:
        if "path" in self.dataset:
            flows = ingest_jsonl(self.dataset["path"])
        else:
            kw = dict(self.dataset["synth"])
            n = int(kw.pop("n_classes"))
            per = kw.pop("flows_per_class")
            per = [int(per)] * n if isinstance(per, (int, float)) else [int(v) for v in per]
            try:
                flows = synth_generate(n, per, **kw)
            except TypeError as e:
                raise ConfigError(f"bad synth parameters: {e}") from e
        return curate(flows, self.min_pkts)
