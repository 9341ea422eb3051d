"""ICBHI 2017 layout: ``<recording>.wav`` next to a 4-column ``<recording>.txt``.

The patient id is the filename token before the first underscore.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from ..audio_core import TARGET_RATE_HZ, AudioSignal, resample
from ..errors import AnnotationError, ParseError
from ..records import ClassLabel, Domain, RespiratoryCycle
from .wav import load_wav

log = logging.getLogger(__name__)

# class histogram of the full public corpus
ICBHI_CLASS_COUNTS = {
    ClassLabel.NORMAL: 3642,
    ClassLabel.CRACKLE: 1864,
    ClassLabel.WHEEZE: 886,
    ClassLabel.BOTH: 506,
}
ICBHI_TOTAL_CYCLES = 6898


@dataclass(frozen=True)
class IcbhiAnnotationRow:
    t_start: float
    t_end: float
    has_crackle: int
    has_wheeze: int

    @property
    def label(self) -> ClassLabel:
        return ClassLabel.from_flags(self.has_crackle, self.has_wheeze)


def parse_icbhi_annotation(text: str) -> list[IcbhiAnnotationRow]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"expected 4 columns, got {len(parts)}", lineno)
        try:
            t0, t1 = float(parts[0]), float(parts[1])
            crackle, wheeze = int(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if crackle not in (0, 1) or wheeze not in (0, 1):
            raise ParseError("crackle/wheeze flags must be 0 or 1", lineno)
        if not (0 <= t0 < t1):
            raise AnnotationError(f"line {lineno}: reversed or negative times {t0} -> {t1}")
        if rows and t0 < rows[-1].t_end:
            raise AnnotationError(f"line {lineno}: cycle starts at {t0} before previous end {rows[-1].t_end}")
        rows.append(IcbhiAnnotationRow(t0, t1, crackle, wheeze))
    return rows


def extract_cycles(audio: AudioSignal, rows, subject_id: str = "", recording_id: str = "",
                   domain: Domain = Domain.SOURCE, labels=None) -> list[RespiratoryCycle]:
    """Slice ``[round(t_start * fs), round(t_end * fs))`` per row.

    Rows running past the end of the audio are clipped; empty slices are skipped.
    Both cases are logged. ``labels`` overrides the per-row label when given.
    """
    fs = audio.sample_rate_hz
    n = len(audio)
    cycles, clipped, skipped = [], 0, 0
    for i, row in enumerate(rows):
        start = int(round(row.t_start * fs))
        end = int(round(row.t_end * fs))
        if end > n:
            clipped += 1
            end = n
        if end <= start:
            skipped += 1
            continue
        label = row.label if labels is None else labels[i]
        cycles.append(
            RespiratoryCycle(
                signal=AudioSignal(audio.samples[start:end].copy(), fs),
                label=label,
                subject_id=subject_id,
                recording_id=recording_id,
                cycle_index=i,
                domain=domain,
            )
        )
    if clipped:
        log.warning("%s: clipped %d cycle(s) at end of audio", recording_id, clipped)
    if skipped:
        log.warning("%s: skipped %d empty cycle(s)", recording_id, skipped)
    return cycles


def patient_id(recording: str) -> str:
    return Path(recording).stem.split("_", 1)[0]


def load_icbhi_dir(directory, target_hz: int = TARGET_RATE_HZ) -> list[RespiratoryCycle]:
    """Load every annotated recording in ``directory`` as 16 kHz source-domain cycles."""
    cycles = []
    for txt in sorted(Path(directory).glob("*.txt")):
        wav = txt.with_suffix(".wav")
        if not wav.exists():
            continue
        rows = parse_icbhi_annotation(txt.read_text())
        audio = load_wav(wav)
        if audio.sample_rate_hz != target_hz:
            audio = resample(audio, target_hz)
        cycles.extend(extract_cycles(audio, rows, patient_id(txt.name), txt.stem, Domain.SOURCE))
    return cycles


def count_icbhi_labels(directory) -> Counter:
    """Class histogram straight from the annotation files (no audio decoding)."""
    counts = Counter()
    for txt in sorted(Path(directory).glob("*.txt")):
        if txt.with_suffix(".wav").exists():
            counts.update(row.label for row in parse_icbhi_annotation(txt.read_text()))
    return counts


def write_annotation(path, rows) -> None:
    lines = [f"{r.t_start:.4f}\t{r.t_end:.4f}\t{r.has_crackle}\t{r.has_wheeze}" for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")
