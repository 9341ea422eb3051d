"""Metrics, variant names, experiment configs and the cross-validation harness."""

from .config import AugmentSettings, ExperimentConfig
from .experiment import CrossvalReport, FoldRecord, pretrain_on_source, run_crossval, run_fold
from .metrics import ConfusionCounts, Metrics, compute_metrics, f_score
from .variants import Variant, parse_variant_name

__all__ = [
    "AugmentSettings",
    "ConfusionCounts",
    "CrossvalReport",
    "ExperimentConfig",
    "FoldRecord",
    "Metrics",
    "Variant",
    "compute_metrics",
    "f_score",
    "parse_variant_name",
    "pretrain_on_source",
    "run_crossval",
    "run_fold",
]
