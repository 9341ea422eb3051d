"""Labelled respiratory-cycle records shared by data loading, augmentation and training."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .audio_core import AudioSignal


class ClassLabel(enum.IntEnum):
    NORMAL = 0
    CRACKLE = 1
    WHEEZE = 2
    BOTH = 3

    @classmethod
    def from_flags(cls, crackle: int, wheeze: int) -> "ClassLabel":
        return {(0, 0): cls.NORMAL, (1, 0): cls.CRACKLE, (0, 1): cls.WHEEZE, (1, 1): cls.BOTH}[
            (int(crackle), int(wheeze))
        ]


class Domain(str, enum.Enum):
    SOURCE = "source"
    TARGET = "target"


DOMAIN_LABELS = {
    Domain.SOURCE: frozenset(ClassLabel),
    Domain.TARGET: frozenset({ClassLabel.NORMAL, ClassLabel.CRACKLE}),
}


@dataclass(frozen=True)
class RespiratoryCycle:
    """One labelled cycle plus the provenance needed to audit augmentation.

    ``vtlp_alpha`` is a deferred spectral warp: VTLP acts on the linear
    magnitude spectrogram, so it is applied during feature extraction to the
    cycle and to each of its phases alike.
    """

    signal: AudioSignal
    label: ClassLabel
    subject_id: str
    recording_id: str
    cycle_index: int
    domain: Domain
    split: str | None = None
    stretch_rate: float | None = None
    vtlp_alpha: float | None = None
    augmented_from: str | None = None

    def __post_init__(self):
        if self.label not in DOMAIN_LABELS[self.domain]:
            raise ValueError(f"label {self.label.name} is not valid in the {self.domain.value} domain")

    @property
    def key(self) -> str:
        return f"{self.recording_id}#{self.cycle_index}"

    @property
    def is_augmented(self) -> bool:
        return self.augmented_from is not None

    def with_split(self, split: str) -> "RespiratoryCycle":
        return replace(self, split=split)
