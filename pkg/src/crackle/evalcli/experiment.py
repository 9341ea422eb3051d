"""Cross-validation harness: pretrain, surgery, fine-tune and evaluate every (run, fold)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..augment import AugmentPlan, apply_plan, sample_rng
from ..dataio.folds import Fold, build_folds
from ..dataio.icbhi import load_icbhi_dir
from ..dataio.manifest import load_manifest
from ..dataio.synth import synth_dataset
from ..errors import DataError, LeakageError
from ..nn.model import Model
from ..nn.train import TrainConfig
from ..pipeline import FeatureCache, SegmentKind, build_dataset
from ..transfer import PretrainedModel, apply_freeze_policy, build_multi_input, fine_tune, pretrain
from .config import ExperimentConfig
from .metrics import ConfusionCounts, compute_metrics, mean_std
from .variants import Variant

log = logging.getLogger(__name__)

METRIC_KEYS = ("se", "p_plus", "f", "accuracy")


def derive_seed(*key) -> int:
    return int(sample_rng(*key).integers(2**31 - 1))


@dataclass
class FoldRecord:
    variant: str
    run_seed: int
    fold: int
    counts: ConfusionCounts
    best_epoch: int = 0
    model: object = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        m = compute_metrics(self.counts)
        return {"variant": self.variant, "run_seed": self.run_seed, "fold": self.fold,
                **self.counts.as_dict(), "se": m.se, "p_plus": m.p_plus, "f": m.f,
                "best_epoch": self.best_epoch}


@dataclass
class CrossvalReport:
    variant: str
    config_hash: str
    records: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def runs(self) -> list[int]:
        return sorted({r.run_seed for r in self.records})

    def run_counts(self, run_seed: int) -> ConfusionCounts:
        total = ConfusionCounts()
        for r in self.records:
            if r.run_seed == run_seed:
                total = total + r.counts
        return total

    def summary(self) -> dict:
        """Micro (counts pooled over folds) and macro (mean of fold metrics) per run, then mean/std over runs."""
        micro = {k: [] for k in METRIC_KEYS}
        macro = {k: [] for k in METRIC_KEYS}
        per_run = []
        for seed in self.runs():
            m = compute_metrics(self.run_counts(seed)).as_dict()
            folds = [compute_metrics(r.counts).as_dict() for r in self.records if r.run_seed == seed]
            per_run.append({"run_seed": seed, **m})
            for k in METRIC_KEYS:
                micro[k].append(m[k])
                macro[k].append(float(np.mean([f[k] for f in folds])))
        out = {"per_run": per_run}
        for name, table in (("micro", micro), ("macro", macro)):
            out[name] = {}
            for k, values in table.items():
                mean, std = mean_std(values)
                out[name][k] = {"mean": mean, "std": std}
        return out

    def to_json(self) -> str:
        payload = {
            "variant": self.variant,
            "config_hash": self.config_hash,
            "provenance": self.provenance,
            "records": [r.as_dict() for r in self.records],
            "summary": self.summary(),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def report_text(self) -> str:
        s = self.summary()
        lines = [f"config {self.config_hash}", "",
                 f"{'Proposed System':44s} {'Se':>8s} {'P+':>8s} {'F-Score':>8s}"]
        micro = s["micro"]
        lines.append(f"{self.variant:44s} {micro['se']['mean']:8.4f} {micro['p_plus']['mean']:8.4f} "
                     f"{micro['f']['mean']:8.4f}")
        lines.append(f"{'  std over runs':44s} {micro['se']['std']:8.4f} {micro['p_plus']['std']:8.4f} "
                     f"{micro['f']['std']:8.4f}")
        macro = s["macro"]
        lines.append(f"{'  macro (mean over folds)':44s} {macro['se']['mean']:8.4f} {macro['p_plus']['mean']:8.4f} "
                     f"{macro['f']['mean']:8.4f}")
        lines.append(f"{'  accuracy':44s} {micro['accuracy']['mean']:8.4f}")
        lines.append("")
        lines.append(f"{'run':>6s} {'fold':>5s} {'tp':>4s} {'fp':>4s} {'tn':>4s} {'fn':>4s} {'Se':>8s} {'P+':>8s} {'F':>8s}")
        for r in self.records:
            d = r.as_dict()
            lines.append(f"{r.run_seed:6d} {r.fold:5d} {r.counts.tp:4d} {r.counts.fp:4d} {r.counts.tn:4d} "
                         f"{r.counts.fn:4d} {d['se']:8.4f} {d['p_plus']:8.4f} {d['f']:8.4f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        results = out / f"{self.variant}.results.json"
        report = out / f"{self.variant}.report.txt"
        results.write_text(self.to_json())
        report.write_text(self.report_text())
        return results, report


# ---------------------------------------------------------------------------
# data resolution


def load_target(cfg: ExperimentConfig):
    if cfg.target_manifest:
        return load_manifest(cfg.target_manifest)
    if cfg.synthetic:
        syn = dict(cfg.synthetic)
        return synth_dataset(int(syn.get("normal", 8)), int(syn.get("crackle", 7)),
                             int(syn.get("cycles_per_subject", 10)), int(syn.get("seed", 0)))
    raise DataError("config names neither a target manifest nor a synthetic corpus")


def split_source_subjects(cycles, val_fraction: float, seed: int):
    """Hold out whole source subjects for validation."""
    subjects = sorted({c.subject_id for c in cycles})
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_val = int(round(val_fraction * len(subjects))) if len(subjects) > 1 else 0
    val_ids = {subjects[i] for i in order[:n_val]}
    train = [c.with_split("train") for c in cycles if c.subject_id not in val_ids]
    val = [c.with_split("val") for c in cycles if c.subject_id in val_ids]
    return train, val


def pretrain_on_source(cfg: ExperimentConfig, source_cycles, padding, cache: FeatureCache | None = None):
    """Single-input 4-class model on the augmented source training subjects."""
    train_c, val_c = split_source_subjects(source_cycles, cfg.source_val_fraction, cfg.pretrain_seed)
    if cfg.augment.enabled:
        plan = AugmentPlan.source(seed=cfg.pretrain_seed, stretch_rates=tuple(cfg.augment.stretch_rates),
                                  vtlp_alpha_range=tuple(cfg.augment.vtlp_alpha_range))
        train_c = apply_plan(train_c, plan)
    kinds = (SegmentKind.CYCLE,)
    cache = cache or FeatureCache()
    train_ds = build_dataset(train_c, kinds, None, padding, cache)
    val_ds = build_dataset(val_c, kinds, None, padding, cache) if val_c else None
    provenance = {"source_cycles": len(source_cycles), "source_train": len(train_ds),
                  "source_val": len(val_c), "padding": str(getattr(padding, "value", padding))}
    log.info("pretraining on %d source cycles (%d val)", len(train_ds), len(val_c))
    return pretrain(train_ds, val_ds, cfg.pretrain, cfg.architecture, seed=cfg.pretrain_seed,
                    provenance=provenance)


def resolve_pretrained(cfg: ExperimentConfig, variant: Variant, source_cycles=None,
                       pretrained: PretrainedModel | None = None) -> PretrainedModel:
    if pretrained is not None:
        return pretrained
    if cfg.pretrained:
        return PretrainedModel.load(cfg.pretrained)
    if source_cycles is None:
        if not cfg.source_dir:
            raise DataError("transfer variant needs a pretrained checkpoint or a source corpus")
        source_cycles = load_icbhi_dir(cfg.source_dir)
    pm, _ = pretrain_on_source(cfg, source_cycles, variant.padding)
    return pm


# ---------------------------------------------------------------------------
# one fold


def check_leakage(fold: Fold, train_c, val_c, test_c) -> None:
    if fold.test & (fold.train | fold.val) or fold.train & fold.val:
        raise LeakageError("fold assigns a subject to more than one split")
    seen = {c.subject_id for c in train_c} | {c.subject_id for c in val_c}
    leaked = seen & {c.subject_id for c in test_c}
    if leaked:
        raise LeakageError(f"test subjects {sorted(leaked)} also appear in train/val")


def _finetune_config(base: TrainConfig, shuffle_seed: int) -> TrainConfig:
    return TrainConfig(**{**base.__dict__, "shuffle_seed": shuffle_seed})


def run_fold(cfg: ExperimentConfig, variant: Variant, fold: Fold, fold_index: int, run_seed: int,
             cycles, cache: FeatureCache, pm: PretrainedModel | None = None,
             keep_model: bool = False) -> FoldRecord:
    train_c = [c.with_split("train") for c in cycles if c.subject_id in fold.train]
    val_c = [c.with_split("val") for c in cycles if c.subject_id in fold.val]
    test_c = [c.with_split("test") for c in cycles if c.subject_id in fold.test]
    check_leakage(fold, train_c, val_c, test_c)
    if cfg.augment.enabled:
        plan = AugmentPlan.target(seed=derive_seed(run_seed, "augment", fold_index),
                                  stretch_rates=tuple(cfg.augment.stretch_rates),
                                  vtlp_alpha_range=tuple(cfg.augment.vtlp_alpha_range))
        train_c = apply_plan(train_c, plan)

    kinds, ratio, padding = variant.segments, variant.ratio, variant.padding
    train_ds = build_dataset(train_c, kinds, ratio, padding, cache)
    val_ds = build_dataset(val_c, kinds, ratio, padding, cache)
    test_ds = build_dataset(test_c, kinds, ratio, padding, cache)

    model_seed = derive_seed(run_seed, "model", fold_index)
    if variant.scratch:
        model = Model(cfg.architecture, n_branches=variant.combo.n_branches, num_classes=2, seed=model_seed)
    else:
        model = build_multi_input(pm, variant.combo, target_classes=2, seed=model_seed)
        model = apply_freeze_policy(model, variant.policy)
    config = _finetune_config(cfg.finetune, derive_seed(run_seed, "shuffle", fold_index))
    model, result = fine_tune(model, train_ds, val_ds, config)

    counts = ConfusionCounts.from_predictions(model.predict(list(test_ds.inputs)), test_ds.labels)
    log.info("run %d fold %d: %s (best epoch %d)", run_seed, fold_index, counts, result.best_epoch)
    return FoldRecord(variant.format(), run_seed, fold_index, counts, result.best_epoch,
                      model if keep_model else None)


def run_crossval(cfg: ExperimentConfig, subjects=None, cycles=None, source_cycles=None,
                 pretrained: PretrainedModel | None = None) -> CrossvalReport:
    """Every seed in ``cfg.seeds`` times every fold, on identical subject splits.

    Test subjects never reach training or validation (checked per fold), and
    only the training split is augmented. Jobs run sequentially in (seed, fold)
    order so the report is deterministic.
    """
    variant = cfg.parsed_variant()
    if subjects is None or cycles is None:
        subjects, cycles = load_target(cfg)
    pm = None if variant.scratch else resolve_pretrained(cfg, variant, source_cycles, pretrained)
    plan = build_folds(subjects, seed=cfg.fold_seed, n_folds=cfg.n_folds)
    plan.validate(subjects)

    cache = FeatureCache()
    report = CrossvalReport(variant.format(), cfg.config_hash(), provenance={
        "seeds": list(cfg.seeds), "fold_seed": cfg.fold_seed, "n_folds": cfg.n_folds,
        "n_subjects": len(subjects), "n_cycles": len(cycles),
        "pretrained_fingerprint": pm.model.fingerprint() if pm else None,
    })
    for run_seed in cfg.seeds:
        for i, fold in enumerate(plan):
            report.records.append(run_fold(cfg, variant, fold, i, run_seed, cycles, cache, pm))
    return report
