"""Log-mel spectrogram extraction.

Frames are 512 samples long with no overlap and a periodic Hann window.
The magnitude of the one-sided DFT (257 bins) is projected onto 45 HTK-style
triangular mel filters, log-compressed and normalised per spectrogram.
"""

from __future__ import annotations

import struct
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import InvalidFrequency, InvalidRange, ShapeError, TooShort

WINDOW_SIZE = 512
N_FFT_BINS = WINDOW_SIZE // 2 + 1
N_MELS = 45
SAMPLE_RATE = 16000
LOG_FLOOR = 1e-10
STD_FLOOR = 1e-12


@lru_cache(maxsize=None)
def hann_window(size: int = WINDOW_SIZE) -> np.ndarray:
    n = np.arange(size)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)
    w.flags.writeable = False
    return w


def stft_magnitude(samples: np.ndarray, window_size: int = WINDOW_SIZE) -> np.ndarray:
    """Return a ``frames x (window_size // 2 + 1)`` magnitude spectrogram.

    Frame ``t`` covers samples ``[t * window_size, (t + 1) * window_size)``;
    trailing samples that do not fill a frame are dropped.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D signal, got shape {x.shape}")
    n_frames = len(x) // window_size
    if n_frames < 1:
        raise TooShort(f"signal of {len(x)} samples is shorter than one {window_size}-sample window")
    frames = x[: n_frames * window_size].reshape(n_frames, window_size)
    return np.abs(np.fft.rfft(frames * hann_window(window_size), axis=1))


def hz_to_mel(f):
    f = np.asarray(f, dtype=np.float64)
    if np.any(f < 0):
        raise InvalidFrequency("frequency must be non-negative")
    mel = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    if np.any(m < 0):
        raise InvalidFrequency("mel value must be non-negative")
    f = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(f) if f.ndim == 0 else f


def build_mel_filterbank(
    n_mels: int = N_MELS,
    n_fft_bins: int = N_FFT_BINS,
    fs: int = SAMPLE_RATE,
    f_min: float = 0.0,
    f_max: float = 8000.0,
) -> np.ndarray:
    """Triangular mel filters sampled at the FFT bin centre frequencies.

    Row ``m`` rises from edge ``m`` to a peak of 1 at edge ``m + 1`` and falls
    back to 0 at edge ``m + 2``; the ``n_mels + 2`` edges are equispaced on
    the mel scale between ``f_min`` and ``f_max``.
    """
    if n_mels < 1:
        raise InvalidRange("need at least one mel band")
    if not (0 <= f_min < f_max <= fs / 2):
        raise InvalidRange(f"need 0 <= f_min < f_max <= {fs / 2}, got {f_min}, {f_max}")
    n_fft = 2 * (n_fft_bins - 1)
    bin_hz = np.arange(n_fft_bins) * fs / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_hz[None, :] - lower) / (centre - lower)
    falling = (upper - bin_hz[None, :]) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


@lru_cache(maxsize=None)
def default_filterbank() -> np.ndarray:
    fb = build_mel_filterbank()
    fb.flags.writeable = False
    return fb


def log_mel(spec: np.ndarray, fb: np.ndarray | None = None) -> np.ndarray:
    """Natural log of the mel-projected magnitudes, floored by ``LOG_FLOOR``."""
    fb = default_filterbank() if fb is None else fb
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != fb.shape[1]:
        raise ShapeError(f"spectrogram {spec.shape} does not match filterbank {fb.shape}")
    return np.log(spec @ fb.T + LOG_FLOOR)


def normalize(values: np.ndarray) -> np.ndarray:
    """Zero mean, unit population std over the whole matrix (all zeros if flat)."""
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean()
    std = values.std()
    if std < STD_FLOOR:
        return np.zeros_like(values)
    return (values - mean) / std


def extract(samples: np.ndarray, vtlp_alpha: float | None = None) -> np.ndarray:
    """Full feature chain for one padded segment: STFT, optional VTLP, log-mel, normalise."""
    spec = stft_magnitude(samples)
    if vtlp_alpha is not None:
        from .augment import vtlp

        spec = vtlp(spec, vtlp_alpha)
    return normalize(log_mel(spec))


# Feature dump: u32 frames, u32 bins, then row-major little-endian float32.
def write_feature_dump(path, values: np.ndarray) -> None:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ShapeError(f"feature dump needs a 2-D matrix, got {values.shape}")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", *values.shape))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_feature_dump(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ShapeError("feature dump is missing its header")
    frames, bins = struct.unpack_from("<II", data)
    body = np.frombuffer(data, dtype="<f4", offset=8)
    if body.size != frames * bins:
        raise ShapeError(f"feature dump holds {body.size} values, header says {frames}x{bins}")
    return body.reshape(frames, bins).astype(np.float32)
