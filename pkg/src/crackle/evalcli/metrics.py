"""Binary crackle-detection metrics from confusion counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyEvaluation

POSITIVE = 1  # Crackle


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            value = int(getattr(self, name))
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
            setattr(self, name, value)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, predicted, labels, positive: int = POSITIVE) -> "ConfusionCounts":
        predicted = np.asarray(predicted) == positive
        actual = np.asarray(labels) == positive
        if predicted.shape != actual.shape:
            raise ValueError("predictions and labels differ in length")
        return cls(
            tp=int((predicted & actual).sum()),
            fp=int((predicted & ~actual).sum()),
            tn=int((~predicted & ~actual).sum()),
            fn=int((~predicted & actual).sum()),
        )

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class Metrics:
    se: float
    p_plus: float
    f: float
    accuracy: float

    def as_dict(self) -> dict:
        return {"se": self.se, "p_plus": self.p_plus, "f": self.f, "accuracy": self.accuracy}


def f_score(se: float, p_plus: float) -> float:
    """Harmonic mean of sensitivity and precision, 0 when both are 0."""
    return 2 * se * p_plus / (se + p_plus) if se + p_plus > 0 else 0.0


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    if counts.total == 0:
        raise EmptyEvaluation("no evaluated cycles")
    se = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    p_plus = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    acc = (counts.tp + counts.tn) / counts.total
    return Metrics(se, p_plus, f_score(se, p_plus), acc)


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
