"""Minibatch training with per-epoch shuffling and best-validation snapshot selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, ShapeError
from .losses import class_balanced_alpha, focal_loss
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

REFERENCE_BATCH_SIZES = (32, 15)


@dataclass
class ArrayDataset:
    """Aligned per-branch feature arrays ``(N, frames, bins)`` plus integer labels."""

    inputs: tuple
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = tuple(np.asarray(x) for x in self.inputs)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if any(len(x) != len(self.labels) for x in self.inputs):
            raise ShapeError("every input array needs one row per label")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "ArrayDataset":
        return ArrayDataset(tuple(x[idx] for x in self.inputs), self.labels[idx])


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 150
    focal_gamma: float = 2.0
    # "balanced" = inverse class frequency of the training labels, normalised to mean 1
    focal_alpha: object = "balanced"
    shuffle_seed: int = 0
    lr: float = 1e-4
    l2_lambda: float = 1e-3
    stop_at_train_acc: float | None = None

    @property
    def reference_schedule(self) -> bool:
        return self.batch_size in REFERENCE_BATCH_SIZES and self.epochs == 150 and self.lr == 1e-4

    def new_optimizer(self) -> AdamState:
        return AdamState(lr=self.lr, l2_lambda=self.l2_lambda)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float | None = None
    state: dict | None = None


def _alpha(config: TrainConfig, labels, num_classes):
    if isinstance(config.focal_alpha, str):
        if config.focal_alpha != "balanced":
            raise ValueError(f"unknown focal_alpha mode {config.focal_alpha!r}")
        return class_balanced_alpha(labels, num_classes)
    if config.focal_alpha is None:
        return None
    return np.asarray(config.focal_alpha, dtype=np.float64)


def accuracy(model, data: ArrayDataset, batch_size: int = 64) -> float:
    if len(data) == 0:
        return float("nan")
    return float((model.predict(list(data.inputs), batch_size) == data.labels).mean())


def train(model, train_data: ArrayDataset, val_data: ArrayDataset | None,
          config: TrainConfig, adam: AdamState | None = None) -> TrainResult:
    """Train ``model`` in place and leave it holding the best-validation snapshot.

    Selection uses validation accuracy with ties going to the earliest epoch;
    without validation data the last epoch wins. Training ends early once
    validation accuracy hits 1.0 since no later epoch could be selected. With zero epochs the initial
    weights are kept.
    """
    if len(train_data) == 0:
        raise EmptyDataset("training set is empty")
    if len(train_data.inputs) != model.n_branches:
        raise ShapeError(f"model has {model.n_branches} branches, data has {len(train_data.inputs)} inputs")
    adam = adam or config.new_optimizer()
    alpha = _alpha(config, train_data.labels, model.num_classes)
    rng = np.random.default_rng(config.shuffle_seed)
    inputs = [np.asarray(x, dtype=model.dtype) for x in train_data.inputs]
    labels = train_data.labels
    n = len(labels)

    result = TrainResult(state=model.state_dict())
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            logits = model.forward([x[idx] for x in inputs], train=True)
            loss, dlogits, probs = focal_loss(logits, labels[idx], config.focal_gamma, alpha)
            model.backward(dlogits)
            adam_step(adam, model)
            loss_sum += loss * len(idx)
            correct += int((probs.argmax(axis=1) == labels[idx]).sum())
        entry = {"epoch": epoch, "train_loss": loss_sum / n, "train_acc": correct / n}
        if val_data is not None and len(val_data):
            entry["val_acc"] = accuracy(model, val_data)
            if result.best_val_acc is None or entry["val_acc"] > result.best_val_acc:
                result.best_val_acc = entry["val_acc"]
                result.best_epoch = epoch
                result.state = model.state_dict()
        else:
            result.best_epoch = epoch
            result.state = model.state_dict()
        result.history.append(entry)
        log.debug("epoch %d %s", epoch, entry)
        if config.stop_at_train_acc is not None and entry["train_acc"] >= config.stop_at_train_acc:
            break
        # strict improvement is impossible past a perfect score, so the pick is final
        if result.best_val_acc == 1.0:
            break

    model.load_state_dict(result.state)
    return result
