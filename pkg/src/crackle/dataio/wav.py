"""WAV reading and writing on top of ``scipy.io.wavfile``."""

from __future__ import annotations

import struct
import warnings

import numpy as np
from scipy.io import wavfile

from ..audio_core import AudioSignal
from ..errors import CorruptFile, UnsupportedFormat

_INT_SCALE = {np.dtype(np.int16): 2.0**15, np.dtype(np.int32): 2.0**31}


def load_wav(path) -> AudioSignal:
    """Read a PCM (8/16/24/32-bit) or float WAV file as floats in [-1, 1].

    Multi-channel files keep only the first channel. 24-bit data arrives from
    scipy left-justified in int32 and is scaled accordingly.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except wavfile.WavFileWarning as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    except (struct.error, EOFError) as exc:
        raise CorruptFile(f"{path}: truncated header ({exc})") from exc
    except ValueError as exc:
        msg = str(exc)
        if "not understood" in msg or "Unknown wave file format" in msg or "Unsupported" in msg:
            raise UnsupportedFormat(f"{path}: {msg}") from exc
        raise CorruptFile(f"{path}: {msg}") from exc
    if data.ndim == 2:
        data = data[:, 0]
    if data.dtype in _INT_SCALE:
        samples = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise UnsupportedFormat(f"{path}: unsupported sample type {data.dtype}")
    return AudioSignal(samples, int(rate))


def write_wav(path, sig: AudioSignal, pcm16: bool = False) -> None:
    """Write 32-bit float samples (lossless round trip) or clipped 16-bit PCM."""
    if pcm16:
        data = np.clip(np.round(sig.samples * 2.0**15), -(2**15), 2**15 - 1).astype(np.int16)
    else:
        data = np.asarray(sig.samples, dtype=np.float32)
    wavfile.write(path, sig.sample_rate_hz, data)
