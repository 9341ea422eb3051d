"""Target-domain manifest: one CSV row per respiratory cycle.

Columns: ``subject_id, condition, audio, t_start, t_end, label``.
``condition`` is ``Healthy`` or ``IPF``; ``label`` is ``Normal`` or ``Crackle``;
``audio`` is resolved relative to the manifest's directory; times are seconds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..audio_core import TARGET_RATE_HZ, resample
from ..errors import ParseError
from ..records import ClassLabel, Domain, RespiratoryCycle
from .icbhi import IcbhiAnnotationRow, extract_cycles
from .wav import load_wav

FIELDS = ("subject_id", "condition", "audio", "t_start", "t_end", "label")
CONDITIONS = ("Healthy", "IPF", "SourceSubject")
_LABELS = {"Normal": ClassLabel.NORMAL, "Crackle": ClassLabel.CRACKLE}


@dataclass
class SubjectRecord:
    subject_id: str
    condition: str
    recordings: list = field(default_factory=list)

    @property
    def is_ipf(self) -> bool:
        return self.condition == "IPF"


@dataclass(frozen=True)
class ManifestRow:
    subject_id: str
    condition: str
    audio: str
    t_start: float
    t_end: float
    label: ClassLabel


def read_manifest(path) -> list[ManifestRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(FIELDS) - set(reader.fieldnames):
            raise ParseError(f"manifest header must contain {', '.join(FIELDS)}", 1)
        for lineno, rec in enumerate(reader, start=2):
            try:
                row = ManifestRow(
                    subject_id=rec["subject_id"],
                    condition=rec["condition"],
                    audio=rec["audio"],
                    t_start=float(rec["t_start"]),
                    t_end=float(rec["t_end"]),
                    label=_LABELS[rec["label"]],
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad manifest row: {exc}", lineno) from exc
            if row.condition not in CONDITIONS:
                raise ParseError(f"unknown condition {row.condition!r}", lineno)
            rows.append(row)
    return rows


def write_manifest(path, rows) -> None:
    names = {v: k for k, v in _LABELS.items()}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELDS)
        for r in rows:
            writer.writerow([r.subject_id, r.condition, r.audio, f"{r.t_start:.7f}", f"{r.t_end:.7f}", names[r.label]])


def load_manifest(path, target_hz: int = TARGET_RATE_HZ) -> tuple[list[SubjectRecord], list[RespiratoryCycle]]:
    """Load subjects and their 16 kHz target-domain cycles."""
    path = Path(path)
    rows = read_manifest(path)
    subjects: dict[str, SubjectRecord] = {}
    by_audio: dict[str, list[ManifestRow]] = {}
    for r in rows:
        subj = subjects.setdefault(r.subject_id, SubjectRecord(r.subject_id, r.condition))
        if subj.condition != r.condition:
            raise ParseError(f"subject {r.subject_id} listed with conditions {subj.condition} and {r.condition}")
        if r.audio not in subj.recordings:
            subj.recordings.append(r.audio)
        by_audio.setdefault(r.audio, []).append(r)

    cycles = []
    for audio_name, audio_rows in by_audio.items():
        audio = load_wav(path.parent / audio_name)
        if audio.sample_rate_hz != target_hz:
            audio = resample(audio, target_hz)
        ann = [IcbhiAnnotationRow(r.t_start, r.t_end, int(r.label == ClassLabel.CRACKLE), 0) for r in audio_rows]
        cycles.extend(
            extract_cycles(audio, ann, audio_rows[0].subject_id, Path(audio_name).stem, Domain.TARGET,
                           labels=[r.label for r in audio_rows])
        )
    return list(subjects.values()), cycles
