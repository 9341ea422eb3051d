"""Training-set augmentation: phase-vocoder time stretching and VTLP."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .audio_core import AudioSignal
from .errors import InvalidAlpha, InvalidRate, LeakageError, PlanMismatch, TooShort
from .features import N_FFT_BINS, SAMPLE_RATE, hann_window
from .records import ClassLabel, Domain, RespiratoryCycle

STRETCH_N_FFT = 512
STRETCH_HOP = 128
VTLP_F_HI = 4800.0


# ---------------------------------------------------------------------------
# time stretching


def _stft(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    pad = n_fft // 2
    xp = np.pad(x, pad, mode="reflect")
    n_frames = 1 + (len(xp) - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(xp[idx] * hann_window(n_fft), axis=1).T


def _istft(spec: np.ndarray, n_fft: int, hop: int, length: int) -> np.ndarray:
    window = hann_window(n_fft)
    frames = np.fft.irfft(spec.T, n=n_fft, axis=1) * window
    n_frames = frames.shape[0]
    total = n_fft + hop * (n_frames - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n_frames):
        out[t * hop : t * hop + n_fft] += frames[t]
        norm[t * hop : t * hop + n_fft] += window**2
    nz = norm > 1e-10
    out[nz] /= norm[nz]
    pad = n_fft // 2
    out = out[pad : pad + length]
    if len(out) < length:
        out = np.pad(out, (0, length - len(out)))
    return out


def time_stretch(sig, rate: float):
    """Change duration by ``1 / rate`` with a phase vocoder, keeping pitch.

    Accepts an ``AudioSignal`` or a bare array and returns the same kind.
    The output has exactly ``round(len / rate)`` samples.
    """
    if not 0.5 <= rate <= 2.0:
        raise InvalidRate(f"stretch rate must lie in [0.5, 2.0], got {rate}")
    x = np.asarray(sig.samples if isinstance(sig, AudioSignal) else sig, dtype=np.float64)
    if len(x) < 2 * STRETCH_N_FFT:
        raise TooShort(f"time stretching needs at least {2 * STRETCH_N_FFT} samples, got {len(x)}")

    spec = _stft(x, STRETCH_N_FFT, STRETCH_HOP)
    steps = np.arange(0, spec.shape[1], rate)
    advance = np.linspace(0, np.pi * STRETCH_HOP, spec.shape[0])
    spec = np.pad(spec, ((0, 0), (0, 2)))
    out = np.empty((spec.shape[0], len(steps)), dtype=complex)
    phase = np.angle(spec[:, 0])
    for i, step in enumerate(steps):
        k = int(step)
        frac = step - k
        left, right = spec[:, k], spec[:, k + 1]
        mag = (1.0 - frac) * np.abs(left) + frac * np.abs(right)
        out[:, i] = mag * np.exp(1j * phase)
        dphase = np.angle(right) - np.angle(left) - advance
        dphase -= 2.0 * np.pi * np.round(dphase / (2.0 * np.pi))
        phase = phase + advance + dphase

    y = _istft(out, STRETCH_N_FFT, STRETCH_HOP, int(round(len(x) / rate)))
    if isinstance(sig, AudioSignal):
        return AudioSignal(y, sig.sample_rate_hz)
    return y


# ---------------------------------------------------------------------------
# vocal tract length perturbation


def vtlp_warp_positions(alpha: float, n_bins: int = N_FFT_BINS, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Fractional destination bin for each source bin under the piecewise-linear warp."""
    nyq_bin = n_bins - 1
    boundary = VTLP_F_HI * min(alpha, 1.0) / alpha * (2 * nyq_bin) / fs
    k = np.arange(n_bins, dtype=np.float64)
    slope = (nyq_bin - alpha * boundary) / (nyq_bin - boundary)
    pos = np.where(k <= boundary, alpha * k, nyq_bin - slope * (nyq_bin - k))
    return np.clip(pos, 0.0, nyq_bin)


def vtlp_matrix(alpha: float, n_bins: int = N_FFT_BINS) -> np.ndarray:
    pos = vtlp_warp_positions(alpha, n_bins)
    lo = np.minimum(np.floor(pos).astype(int), n_bins - 2)
    hi_weight = pos - lo
    warp = np.zeros((n_bins, n_bins))
    rows = np.arange(n_bins)
    warp[rows, lo] += 1.0 - hi_weight
    warp[rows, lo + 1] += hi_weight
    return warp


def vtlp(spec: np.ndarray, alpha: float) -> np.ndarray:
    """Warp the frequency axis of a ``frames x 257`` magnitude spectrogram.

    Each source bin's magnitude is split linearly between the two bins
    around its warped position, so total magnitude is preserved.
    """
    if not 0.9 <= alpha <= 1.1:
        raise InvalidAlpha(f"VTLP alpha must lie in [0.9, 1.1], got {alpha}")
    spec = np.asarray(spec, dtype=np.float64)
    return spec @ vtlp_matrix(alpha, spec.shape[1])


# ---------------------------------------------------------------------------
# per-domain policy


@dataclass(frozen=True)
class AugmentPlan:
    domain: Domain
    stretch_classes: frozenset = frozenset()
    vtlp_classes: frozenset = frozenset()
    stretch_rates: tuple = (0.8, 1.2)
    vtlp_alpha_range: tuple = (0.9, 1.1)
    seed: int = 0

    @classmethod
    def source(cls, seed: int = 0, **kw) -> "AugmentPlan":
        return cls(
            Domain.SOURCE,
            stretch_classes=frozenset({ClassLabel.WHEEZE, ClassLabel.BOTH}),
            vtlp_classes=frozenset(ClassLabel),
            seed=seed,
            **kw,
        )

    @classmethod
    def target(cls, seed: int = 0, **kw) -> "AugmentPlan":
        return cls(Domain.TARGET, vtlp_classes=frozenset({ClassLabel.CRACKLE}), seed=seed, **kw)


def sample_rng(seed: int, *key) -> np.random.Generator:
    """Generator keyed on content rather than position, so ordering never matters."""
    text = ":".join(str(k) for k in (seed, *key))
    digest = hashlib.sha256(text.encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def apply_plan(dataset: list[RespiratoryCycle], plan: AugmentPlan) -> list[RespiratoryCycle]:
    """Return ``dataset`` followed by its stretched copies and then its VTLP copies."""
    for cyc in dataset:
        if cyc.domain != plan.domain:
            raise PlanMismatch(f"{cyc.key} is a {cyc.domain.value} cycle, plan is for {plan.domain.value}")
        if cyc.split in ("val", "test"):
            raise LeakageError(f"refusing to augment {cyc.key} from the {cyc.split} split")

    stretched = []
    for cyc in dataset:
        if cyc.label not in plan.stretch_classes:
            continue
        rng = sample_rng(plan.seed, "stretch", cyc.recording_id, cyc.cycle_index)
        rate = float(plan.stretch_rates[rng.integers(len(plan.stretch_rates))])
        stretched.append(
            replace(
                cyc,
                signal=time_stretch(cyc.signal, rate),
                stretch_rate=rate,
                split="train",
                augmented_from=cyc.key,
            )
        )

    warped = []
    low, high = plan.vtlp_alpha_range
    for cyc in [*dataset, *stretched]:
        if cyc.label not in plan.vtlp_classes:
            continue
        rng = sample_rng(plan.seed, "vtlp", cyc.recording_id, cyc.cycle_index, cyc.stretch_rate)
        warped.append(
            replace(
                cyc,
                vtlp_alpha=float(rng.uniform(low, high)),
                split="train",
                augmented_from=cyc.augmented_from or cyc.key,
            )
        )
    return [*dataset, *stretched, *warped]
