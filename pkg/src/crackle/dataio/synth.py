"""Synthetic lung-sound corpora standing in for the private clinical recordings.

Normal cycles are band-limited noise under a two-hump breath envelope, the
inspiratory hump first and louder. Crackle cycles add 5-20 damped sinusoids
(5-15 ms, 100-2000 Hz) in the mid-to-late inspiratory part of the cycle.
Source-domain cycles come from a different "device" (8 kHz, other noise band
and gain) and add wheezes: sustained tones with slight vibrato.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfilt

from ..audio_core import TARGET_RATE_HZ, AudioSignal
from ..augment import sample_rng
from ..records import ClassLabel, Domain, RespiratoryCycle
from .icbhi import IcbhiAnnotationRow, write_annotation
from .manifest import ManifestRow, SubjectRecord, write_manifest
from .wav import write_wav

SOURCE_RATE_HZ = 8000
# crackles sit in this fraction of the cycle (mid to late inspiration)
CRACKLE_REGION = (0.15, 0.45)


@dataclass(frozen=True)
class Device:
    rate_hz: int
    band: tuple
    gain: float


TARGET_DEVICE = Device(TARGET_RATE_HZ, (100.0, 1000.0), 0.05)
SOURCE_DEVICE = Device(SOURCE_RATE_HZ, (80.0, 1500.0), 0.1)


def _breath_noise(rng, n, device: Device, insp_frac: float):
    sos = butter(4, device.band, btype="bandpass", fs=device.rate_hz, output="sos")
    noise = sosfilt(sos, rng.standard_normal(n))
    noise /= noise.std() + 1e-12
    t = np.arange(n) / n
    split = insp_frac
    env = np.where(
        t < split,
        np.sin(np.pi * t / split) ** 2,
        0.6 * np.sin(np.pi * (t - split) / (1 - split)) ** 2,
    )
    return noise * (0.15 + env) * device.gain


def _add_crackles(rng, x, fs, region, gain):
    n = len(x)
    for _ in range(int(rng.integers(5, 21))):
        dur = rng.uniform(0.005, 0.015)
        freq = rng.uniform(100.0, 2000.0)
        m = max(2, int(dur * fs))
        t = np.arange(m) / fs
        burst = np.exp(-5.0 * t / dur) * np.sin(2 * np.pi * freq * t)
        start = int(rng.uniform(*region) * n)
        end = min(n, start + m)
        x[start:end] += gain * rng.uniform(3.0, 6.0) * burst[: end - start]


def _add_wheeze(rng, x, fs, gain):
    n = len(x)
    length = int(rng.uniform(0.3, 0.6) * n)
    start = int(rng.integers(0, n - length))
    t = np.arange(length) / fs
    f0 = rng.uniform(150.0, 800.0)
    phase = 2 * np.pi * f0 * t + 0.5 * np.sin(2 * np.pi * 5.0 * t)
    taper = np.sin(np.pi * np.arange(length) / length) ** 0.5
    x[start : start + length] += gain * rng.uniform(2.0, 4.0) * taper * np.sin(phase)


def synth_cycle(rng, label: ClassLabel, device: Device, crackle_region=CRACKLE_REGION) -> np.ndarray:
    """One cycle of 2.5-4.5 s as float32 samples at ``device.rate_hz``."""
    fs = device.rate_hz
    n = int(rng.uniform(2.5, 4.5) * fs)
    insp_frac = rng.uniform(0.4, 0.5)
    x = _breath_noise(rng, n, device, insp_frac)
    if label in (ClassLabel.CRACKLE, ClassLabel.BOTH):
        _add_crackles(rng, x, fs, crackle_region, device.gain)
    if label in (ClassLabel.WHEEZE, ClassLabel.BOTH):
        _add_wheeze(rng, x, fs, device.gain)
    return x.astype(np.float32)


def synth_dataset(n_subjects_normal: int, n_subjects_crackle: int, cycles_per_subject: int,
                  seed: int = 0) -> tuple[list[SubjectRecord], list[RespiratoryCycle]]:
    """Target-domain stand-in: healthy subjects with normal cycles, IPF subjects with crackles.

    Each subject has one recording ``<subject>_rec`` whose cycles are indexed
    in order; generation is keyed on (seed, subject) so it is reproducible.
    """
    if min(n_subjects_normal, n_subjects_crackle, cycles_per_subject) < 1:
        raise ValueError("all counts must be >= 1")
    subjects, cycles = [], []
    plan = [(f"H{i:02d}", "Healthy", ClassLabel.NORMAL) for i in range(n_subjects_normal)]
    plan += [(f"P{i:02d}", "IPF", ClassLabel.CRACKLE) for i in range(n_subjects_crackle)]
    for sid, condition, label in plan:
        rng = sample_rng(seed, "target-subject", sid)
        rec = f"{sid}_rec"
        subjects.append(SubjectRecord(sid, condition, [rec]))
        for c in range(cycles_per_subject):
            x = synth_cycle(rng, label, TARGET_DEVICE)
            cycles.append(RespiratoryCycle(AudioSignal(x, TARGET_RATE_HZ), label, sid, rec, c, Domain.TARGET))
    return subjects, cycles


def synth_source_dataset(n_subjects: int = 8, cycles_per_subject: int = 8, seed: int = 0) -> list[RespiratoryCycle]:
    """Four-class source-domain stand-in recorded at 8 kHz, labels cycling through all classes."""
    cycles = []
    labels = list(ClassLabel)
    for s in range(n_subjects):
        sid = f"{101 + s}"
        rng = sample_rng(seed, "source-subject", sid)
        rec = f"{sid}_1b1_Al_sc_Synth"
        for c in range(cycles_per_subject):
            label = labels[(s + c) % 4]
            x = synth_cycle(rng, label, SOURCE_DEVICE, crackle_region=(0.1, 0.8))
            cycles.append(RespiratoryCycle(AudioSignal(x, SOURCE_RATE_HZ), label, sid, rec, c, Domain.SOURCE))
    return cycles


def _concat(cycles):
    """Join cycles back to back, returning the recording and per-cycle (start, end) seconds."""
    fs = cycles[0].signal.sample_rate_hz
    parts, bounds, pos = [], [], 0
    for cyc in cycles:
        n = len(cyc.signal)
        parts.append(cyc.signal.samples)
        bounds.append((pos / fs, (pos + n) / fs))
        pos += n
    return AudioSignal(np.concatenate(parts).astype(np.float32), fs), bounds


def write_target_corpus(out_dir, subjects, cycles) -> Path:
    """Write one float WAV per recording plus ``manifest.csv``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    conditions = {s.subject_id: s.condition for s in subjects}
    rows = []
    by_rec: dict[str, list] = {}
    for cyc in cycles:
        by_rec.setdefault(cyc.recording_id, []).append(cyc)
    for rec, recs in by_rec.items():
        recs.sort(key=lambda c: c.cycle_index)
        audio, bounds = _concat(recs)
        write_wav(out / f"{rec}.wav", audio)
        for cyc, (t0, t1) in zip(recs, bounds):
            rows.append(ManifestRow(cyc.subject_id, conditions[cyc.subject_id], f"{rec}.wav", t0, t1, cyc.label))
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


def write_source_corpus(out_dir, cycles) -> Path:
    """Write cycles in ICBHI layout (``<rec>.wav`` + 4-column ``<rec>.txt``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_rec: dict[str, list] = {}
    for cyc in cycles:
        by_rec.setdefault(cyc.recording_id, []).append(cyc)
    for rec, recs in by_rec.items():
        recs.sort(key=lambda c: c.cycle_index)
        audio, bounds = _concat(recs)
        write_wav(out / f"{rec}.wav", audio)
        rows = [
            IcbhiAnnotationRow(t0, t1, int(c.label in (ClassLabel.CRACKLE, ClassLabel.BOTH)),
                               int(c.label in (ClassLabel.WHEEZE, ClassLabel.BOTH)))
            for c, (t0, t1) in zip(recs, bounds)
        ]
        write_annotation(out / f"{rec}.txt", rows)
    return out
