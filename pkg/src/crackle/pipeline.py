"""Turn labelled cycles into aligned network inputs (cycle and/or phase spectrograms)."""

from __future__ import annotations

import enum

import numpy as np

from .audio_core import (
    MAX_CYCLE_SAMPLES,
    TARGET_RATE_HZ,
    AudioSignal,
    PhaseRatio,
    fixed_lengths_for,
    resample,
    sample_pad,
    split_phases,
    zero_pad,
)
from .features import extract
from .nn.train import ArrayDataset


class SegmentKind(str, enum.Enum):
    CYCLE = "Cyc"
    INSPIRATION = "Ins"
    EXPIRATION = "Exp"


class Padding(str, enum.Enum):
    SAMPLE = "SamplePad"
    ZERO = "ZeroPad"


def padded_segments(samples: np.ndarray, kinds, ratio: PhaseRatio | None, padding: Padding,
                    cycle_len: int = MAX_CYCLE_SAMPLES) -> list[np.ndarray]:
    """Split (when phases are requested) and pad each segment to its fixed length.

    The split ratio applies to the 16 kHz cycle before padding; phase lengths
    come from applying the same ratio to ``cycle_len``.
    """
    pad = sample_pad if Padding(padding) is Padding.SAMPLE else zero_pad
    kinds = [SegmentKind(k) for k in kinds]
    needs_phases = any(k is not SegmentKind.CYCLE for k in kinds)
    if needs_phases:
        if ratio is None:
            raise ValueError("phase inputs need a split ratio")
        insp, exp = split_phases(samples, ratio)
        lengths = fixed_lengths_for(ratio, cycle_len)
    out = []
    for kind in kinds:
        if kind is SegmentKind.CYCLE:
            out.append(pad(samples, cycle_len))
        elif kind is SegmentKind.INSPIRATION:
            out.append(pad(insp, lengths.insp_len))
        else:
            out.append(pad(exp, lengths.exp_len))
    return out


def cycle_features(cycle, kinds, ratio, padding, cycle_len: int = MAX_CYCLE_SAMPLES) -> list[np.ndarray]:
    """Normalised log-mel matrix per requested segment of one cycle, as float32."""
    sig: AudioSignal = cycle.signal
    if sig.sample_rate_hz != TARGET_RATE_HZ:
        sig = resample(sig, TARGET_RATE_HZ)
    segs = padded_segments(np.asarray(sig.samples, dtype=np.float64), kinds, ratio, padding, cycle_len)
    return [extract(seg, cycle.vtlp_alpha).astype(np.float32) for seg in segs]


class FeatureCache:
    """Memoises features per (cycle, augmentation, segment layout)."""

    def __init__(self):
        self._store = {}

    def __len__(self):
        return len(self._store)

    def get(self, cycle, kinds, ratio, padding, cycle_len=MAX_CYCLE_SAMPLES):
        key = (cycle.key, cycle.stretch_rate, cycle.vtlp_alpha, tuple(kinds), ratio, padding, cycle_len)
        hit = self._store.get(key)
        if hit is None:
            hit = self._store[key] = cycle_features(cycle, kinds, ratio, padding, cycle_len)
        return hit


def build_dataset(cycles, kinds, ratio, padding, cache: FeatureCache | None = None,
                  cycle_len: int = MAX_CYCLE_SAMPLES) -> ArrayDataset:
    kinds = tuple(SegmentKind(k) for k in kinds)
    if cache is None:
        feats = [cycle_features(c, kinds, ratio, padding, cycle_len) for c in cycles]
    else:
        feats = [cache.get(c, kinds, ratio, padding, cycle_len) for c in cycles]
    labels = np.array([int(c.label) for c in cycles], dtype=np.int64)
    if not feats:
        return ArrayDataset(tuple(np.zeros((0, 1, 1), np.float32) for _ in kinds), labels)
    inputs = tuple(np.stack([f[i] for f in feats]) for i in range(len(kinds)))
    return ArrayDataset(inputs, labels)
