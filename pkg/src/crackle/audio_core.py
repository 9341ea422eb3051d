"""Raw-signal preprocessing: resampling, phase splitting and fixed-length padding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySignal, InvalidRatio, InvalidSignal, TooShort

TARGET_RATE_HZ = 16000
# Longest respiratory cycle of the clinical target corpus at 16 kHz.
MAX_CYCLE_SAMPLES = 131960

RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_KAISER_BETA = 8.6
RESAMPLE_CUTOFF = 0.9


@dataclass(frozen=True, eq=False)
class AudioSignal:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise InvalidSignal(f"expected a 1-D signal, got shape {samples.shape}")
        if self.sample_rate_hz <= 0:
            raise InvalidSignal(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True, order=True)
class PhaseRatio:
    """Inspiration length as a fraction ``insp_num / cycle_den`` of the full cycle."""

    insp_num: int
    cycle_den: int

    def __post_init__(self):
        if (self.insp_num, self.cycle_den) not in _ALLOWED_RATIOS:
            raise InvalidRatio(f"unsupported phase ratio {self.insp_num}:{self.cycle_den}")

    @classmethod
    def parse(cls, text: str) -> "PhaseRatio":
        """Accept ``"1:2"`` or the compact variant-name form ``"12"``."""
        text = str(text).strip()
        if ":" in text:
            num, den = text.split(":", 1)
        elif len(text) == 2 and text.isdigit():
            num, den = text[0], text[1]
        else:
            raise InvalidRatio(f"cannot parse phase ratio {text!r}")
        try:
            return cls(int(num), int(den))
        except ValueError as exc:
            raise InvalidRatio(str(exc)) from exc

    @property
    def token(self) -> str:
        return f"{self.insp_num}{self.cycle_den}"

    def __str__(self):
        return f"{self.insp_num}:{self.cycle_den}"


_ALLOWED_RATIOS = {(1, 3), (2, 5), (3, 7), (4, 9), (1, 2)}
STANDARD_RATIOS = tuple(PhaseRatio(n, d) for n, d in [(1, 3), (2, 5), (3, 7), (4, 9), (1, 2)])


@dataclass(frozen=True)
class FixedLengths:
    cycle_len: int
    insp_len: int
    exp_len: int


def round_half_up_div(num: int, den: int) -> int:
    """``round(num / den)`` with halves rounded up, in exact integer arithmetic."""
    return (2 * num + den) // (2 * den)


def _check_samples(samples) -> np.ndarray:
    samples = np.asarray(samples.samples if isinstance(samples, AudioSignal) else samples)
    if samples.ndim != 1:
        raise InvalidSignal(f"expected a 1-D signal, got shape {samples.shape}")
    if samples.size == 0:
        raise EmptySignal("signal has no samples")
    return samples


def _kaiser(tau: np.ndarray, half_width: float, beta: float) -> np.ndarray:
    r = np.clip(tau / half_width, -1.0, 1.0)
    return np.i0(beta * np.sqrt(1.0 - r * r)) / np.i0(beta)


def resample(sig: AudioSignal, target_hz: int) -> AudioSignal:
    """Band-limited resampling with a Kaiser-windowed sinc kernel.

    The kernel is evaluated at the fractional offsets of each polyphase branch
    and each branch is normalised to unit DC gain, so constant signals are
    reproduced exactly away from the edges. Output length is
    ``round(len * target_hz / source_hz)``.
    """
    samples = _check_samples(sig)
    if target_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_hz}")
    if not np.all(np.isfinite(samples)):
        raise InvalidSignal("signal contains NaN or Inf samples")
    src = sig.sample_rate_hz
    if src == target_hz:
        return AudioSignal(samples.copy(), target_hz)

    g = math.gcd(src, target_hz)
    up, down = target_hz // g, src // g
    n_out = round_half_up_div(len(samples) * target_hz, src)
    scale = min(1.0, target_hz / src)
    cutoff = 0.5 * RESAMPLE_CUTOFF * scale  # cycles per input sample
    half_width = (RESAMPLE_TAPS_PER_PHASE / 2) / scale
    k_half = int(math.ceil(half_width))

    # one row of taps per polyphase branch; tau = t - k for the input index k
    phases = np.arange(up)
    frac = phases / up
    j = np.arange(2 * k_half)
    tau = frac[:, None] + (k_half - 1 - j)[None, :]
    table = np.sinc(2.0 * cutoff * tau) * _kaiser(tau, half_width, RESAMPLE_KAISER_BETA)
    # support test in exact integers: |tau| < half_width  <=>  |tau * up| < taps/2 * max(up, down)
    tau_num = phases[:, None] + up * (k_half - 1 - j)[None, :]
    table[np.abs(tau_num) * 2 >= RESAMPLE_TAPS_PER_PHASE * max(up, down)] = 0.0
    table /= table.sum(axis=1, keepdims=True)

    x = samples.astype(np.float64)
    xp = np.concatenate([np.zeros(k_half), x, np.zeros(k_half + 1)])
    out = np.empty(n_out)
    chunk = max(1, 2**20 // (2 * k_half))
    for start in range(0, n_out, chunk):
        n = np.arange(start, min(n_out, start + chunk), dtype=np.int64)
        pos = n * down
        base = pos // up
        phase = pos % up
        idx = base[:, None] + (j - k_half + 1)[None, :] + k_half
        idx = np.minimum(idx, len(xp) - 1)
        out[start : start + len(n)] = np.einsum("ij,ij->i", xp[idx], table[phase])
    return AudioSignal(out, target_hz)


def split_phases(cycle, ratio: PhaseRatio) -> tuple[np.ndarray, np.ndarray]:
    """Split a full cycle into (inspiration, expiration) by a fixed length ratio."""
    samples = _check_samples(cycle)
    if len(samples) < 2:
        raise TooShort(f"cycle of {len(samples)} samples cannot be split")
    n_insp = round_half_up_div(len(samples) * ratio.insp_num, ratio.cycle_den)
    return samples[:n_insp], samples[n_insp:]


def fixed_lengths_for(ratio: PhaseRatio, cycle_len: int = MAX_CYCLE_SAMPLES) -> FixedLengths:
    insp = round_half_up_div(cycle_len * ratio.insp_num, ratio.cycle_den)
    return FixedLengths(cycle_len=cycle_len, insp_len=insp, exp_len=cycle_len - insp)


def sample_pad(seg, target_len: int) -> np.ndarray:
    """Extend ``seg`` with copies of itself in alternating time-reversed order.

    The result is the first ``target_len`` samples of ``s, s[::-1], s, s[::-1], ...``,
    so padding starts from the last sample. Longer inputs keep their first
    ``target_len`` samples.
    """
    samples = _check_samples(seg)
    if target_len < 1:
        raise ValueError(f"target length must be >= 1, got {target_len}")
    if len(samples) >= target_len:
        return samples[:target_len].copy()
    return np.resize(np.concatenate([samples, samples[::-1]]), target_len)


def zero_pad(seg, target_len: int) -> np.ndarray:
    samples = _check_samples(seg)
    if target_len < 1:
        raise ValueError(f"target length must be >= 1, got {target_len}")
    if len(samples) >= target_len:
        return samples[:target_len].copy()
    out = np.zeros(target_len, dtype=samples.dtype)
    out[: len(samples)] = samples
    return out
