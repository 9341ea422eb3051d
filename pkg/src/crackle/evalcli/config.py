"""Experiment configuration stored as YAML.

Example::

    variant: 2ndConv_Cyc_Inp_Ratio_12_SamplePad
    target_manifest: data/target/manifest.csv
    source_dir: data/icbhi            # used when no checkpoint is given
    pretrained: null                  # path to a .ckpt from `crackle pretrain`
    seeds: [0, 1, 2, 3, 4]
    n_folds: 7
    fold_seed: 0
    architecture: {channels: [16, 32, 64, 64, 128, 128, 256]}
    pretrain: {batch_size: 32, epochs: 150, lr: 0.0001}
    finetune: {batch_size: 15, epochs: 150, lr: 0.0001}
    augment: {enabled: true, stretch_rates: [0.8, 1.2], vtlp_alpha_range: [0.9, 1.1]}

Relative paths resolve against the config file's directory. Instead of
``target_manifest`` a ``synthetic`` block (normal, crackle, cycles_per_subject,
seed) generates the target corpus in memory.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ParseError
from ..nn.model import DEFAULT_CHANNELS, ArchitectureSpec
from ..nn.train import TrainConfig
from .variants import Variant, parse_variant_name


@dataclass
class AugmentSettings:
    enabled: bool = True
    stretch_rates: tuple = (0.8, 1.2)
    vtlp_alpha_range: tuple = (0.9, 1.1)


@dataclass
class ExperimentConfig:
    variant: str = "2ndConv_Cyc_Inp_Ratio_12_SamplePad"
    target_manifest: str | None = None
    synthetic: dict | None = None
    source_dir: str | None = None
    pretrained: str | None = None
    seeds: tuple = (0, 1, 2, 3, 4)
    n_folds: int = 7
    fold_seed: int = 0
    channels: tuple = DEFAULT_CHANNELS
    pretrain: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=32))
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=15))
    augment: AugmentSettings = field(default_factory=AugmentSettings)
    pretrain_seed: int = 0
    source_val_fraction: float = 0.2

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.channels = tuple(int(c) for c in self.channels)
        self.parsed_variant()  # fail early on a bad name

    def parsed_variant(self) -> Variant:
        return parse_variant_name(self.variant)

    @property
    def architecture(self) -> ArchitectureSpec:
        return ArchitectureSpec(self.channels)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["architecture"] = {"channels": list(d.pop("channels"))}
        d["seeds"] = list(self.seeds)
        d["augment"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["augment"].items()}
        return d

    def config_hash(self) -> str:
        """sha256 over the canonical JSON form; paths are hashed as written."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)} | {"architecture"}
        unknown = set(data) - known
        if unknown:
            raise ParseError(f"unknown config keys {sorted(unknown)}")
        kw = {}
        try:
            if "architecture" in data:
                kw["channels"] = tuple(data.pop("architecture").get("channels", DEFAULT_CHANNELS))
            for name, default_batch in (("pretrain", 32), ("finetune", 15)):
                if name in data:
                    kw[name] = TrainConfig(**{"batch_size": default_batch, **data.pop(name)})
            if "augment" in data:
                aug = data.pop("augment")
                kw["augment"] = AugmentSettings(
                    enabled=bool(aug.get("enabled", True)),
                    stretch_rates=tuple(aug.get("stretch_rates", (0.8, 1.2))),
                    vtlp_alpha_range=tuple(aug.get("vtlp_alpha_range", (0.9, 1.1))),
                )
        except (TypeError, AttributeError) as exc:
            raise ParseError(f"bad config section: {exc}") from exc
        for key in ("target_manifest", "source_dir", "pretrained"):
            if data.get(key) is not None and base_dir is not None:
                data[key] = str(Path(base_dir) / data[key])
        return cls(**data, **kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ParseError(f"{path}: expected a mapping at the top level")
        return cls.from_dict(data or {}, base_dir=path.parent)

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))
