"""Dataset ingestion: ICBHI parsing, WAV I/O, target manifests, folds and synthetic corpora."""

from .folds import Fold, FoldPlan, build_folds
from .icbhi import (
    ICBHI_CLASS_COUNTS,
    ICBHI_TOTAL_CYCLES,
    IcbhiAnnotationRow,
    count_icbhi_labels,
    extract_cycles,
    load_icbhi_dir,
    parse_icbhi_annotation,
)
from .manifest import SubjectRecord, load_manifest, read_manifest, write_manifest
from .synth import synth_dataset, synth_source_dataset, write_source_corpus, write_target_corpus
from .wav import load_wav, write_wav

__all__ = [
    "Fold",
    "FoldPlan",
    "ICBHI_CLASS_COUNTS",
    "ICBHI_TOTAL_CYCLES",
    "IcbhiAnnotationRow",
    "SubjectRecord",
    "build_folds",
    "count_icbhi_labels",
    "extract_cycles",
    "load_icbhi_dir",
    "load_manifest",
    "load_wav",
    "parse_icbhi_annotation",
    "read_manifest",
    "synth_dataset",
    "synth_source_dataset",
    "write_manifest",
    "write_source_corpus",
    "write_target_corpus",
    "write_wav",
]
