"""Pre-training on the source domain and checkpoint surgery into multi-input models."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ComboMismatch, DegenerateDataset, IncompatibleCheckpoint, InvalidPolicy
from .nn import checkpoint
from .nn.model import ArchitectureSpec, Model
from .nn.train import ArrayDataset, TrainConfig, TrainResult, train
from .pipeline import SegmentKind

log = logging.getLogger(__name__)

SOURCE_CLASSES = 4


class BranchCombo(enum.Enum):
    CYC = (SegmentKind.CYCLE,)
    CYC_INS = (SegmentKind.CYCLE, SegmentKind.INSPIRATION)
    CYC_EXP = (SegmentKind.CYCLE, SegmentKind.EXPIRATION)
    INS_EXP = (SegmentKind.INSPIRATION, SegmentKind.EXPIRATION)
    CYC_INS_EXP = (SegmentKind.CYCLE, SegmentKind.INSPIRATION, SegmentKind.EXPIRATION)

    @property
    def segments(self) -> tuple:
        return self.value

    @property
    def n_branches(self) -> int:
        return len(self.value)

    @classmethod
    def from_segments(cls, segments) -> "BranchCombo":
        segments = tuple(SegmentKind(s) for s in segments)
        for combo in cls:
            if combo.value == segments:
                return combo
        raise ComboMismatch(f"unsupported input combination {[s.value for s in segments]}")


class StartKind(str, enum.Enum):
    BN = "BN"
    CONV = "Conv"


@dataclass(frozen=True)
class FreezePolicy:
    """First trainable layer of every branch: block ``start_block``'s BN or Conv.

    Conv layers of earlier blocks stay frozen. With ``bn_always_trainable``
    every BN layer is updated regardless of where fine-tuning starts, which
    makes ``(k, BN)`` and ``(k, Conv)`` freeze the same conv layers.
    """

    start_block: int
    start_kind: StartKind = StartKind.CONV
    bn_always_trainable: bool = True

    def __post_init__(self):
        if not 1 <= self.start_block <= 7:
            raise InvalidPolicy(f"start block must be in 1..7, got {self.start_block}")
        object.__setattr__(self, "start_kind", StartKind(self.start_kind))

    def conv_trainable(self, block: int) -> bool:
        return block >= self.start_block

    def bn_trainable(self, block: int) -> bool:
        if self.bn_always_trainable:
            return True
        if block != self.start_block:
            return block > self.start_block
        return self.start_kind is StartKind.BN


@dataclass
class PretrainedModel:
    model: Model
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.model.n_branches != 1:
            raise IncompatibleCheckpoint("a pre-trained model must have a single branch")

    @property
    def arch(self) -> ArchitectureSpec:
        return self.model.arch

    @property
    def source_classes(self) -> int:
        return self.model.num_classes

    def save(self, path) -> None:
        path = Path(path)
        checkpoint.save(self.model, path)
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(self.provenance, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "PretrainedModel":
        path = Path(path)
        model = checkpoint.load(path)
        meta = path.with_suffix(path.suffix + ".json")
        provenance = json.loads(meta.read_text()) if meta.exists() else {}
        return cls(model, provenance)


def pretrain(train_data: ArrayDataset, val_data: ArrayDataset | None, config: TrainConfig,
             arch: ArchitectureSpec = ArchitectureSpec(), seed: int = 0,
             provenance: dict | None = None) -> tuple[PretrainedModel, TrainResult]:
    """Train the single-input network from scratch on (augmented) source-domain features."""
    present = set(np.unique(train_data.labels).tolist())
    missing = set(range(SOURCE_CLASSES)) - present
    if missing:
        raise DegenerateDataset(f"source training set lacks classes {sorted(missing)}")
    model = Model(arch, n_branches=1, num_classes=SOURCE_CLASSES, seed=seed)
    result = train(model, train_data, val_data, config)
    meta = {"seed": seed, "best_epoch": result.best_epoch, **(provenance or {})}
    return PretrainedModel(model, meta), result


def _branch_state(pm: PretrainedModel) -> dict:
    state = pm.model.state_dict()
    return {k[len("b0."):]: v for k, v in state.items() if k.startswith("b0.")}


def build_multi_input(pm: PretrainedModel, combo: BranchCombo, target_classes: int = 2,
                      seed: int = 0) -> Model:
    """One independent copy of the pre-trained blocks per branch and a fresh output layer.

    The source output layer is discarded; the new head is Glorot-initialised
    over the concatenated GAP features.
    """
    branch = _branch_state(pm)
    model = Model(pm.arch, n_branches=combo.n_branches, num_classes=target_classes, seed=seed)
    state = model.state_dict()
    expected = {k[len("b0."):] for k in state if k.startswith("b0.")}
    if set(branch) != expected:
        raise IncompatibleCheckpoint("checkpoint does not cover the single-branch architecture")
    for b in range(combo.n_branches):
        for name, value in branch.items():
            state[f"b{b}.{name}"] = value.copy()
    model.load_state_dict(state)
    return model


def build_single_from_pretrained(pm: PretrainedModel, target_classes: int = 2, seed: int = 0) -> Model:
    return build_multi_input(pm, BranchCombo.CYC, target_classes, seed)


def apply_freeze_policy(model: Model, policy: FreezePolicy) -> Model:
    """Return a copy of ``model`` with trainable flags set identically in every branch."""
    out = model.copy()
    for b in range(out.n_branches):
        for i in range(1, out.arch.n_blocks + 1):
            out.trainable[f"b{b}.block{i}.bn"] = policy.bn_trainable(i)
            out.trainable[f"b{b}.block{i}.conv"] = policy.conv_trainable(i)
    out.trainable["head"] = True
    return out


def fine_tune(model: Model, train_data: ArrayDataset, val_data: ArrayDataset | None,
              config: TrainConfig) -> tuple[Model, TrainResult]:
    if len(train_data.inputs) != model.n_branches:
        raise ComboMismatch(f"model has {model.n_branches} branches, data provides {len(train_data.inputs)} inputs")
    result = train(model, train_data, val_data, config)
    return model, result
