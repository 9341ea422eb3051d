"""``crackle`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audio_core import TARGET_RATE_HZ, AudioSignal, PhaseRatio, resample
from .errors import CrackleError, DataError, EmptyEvaluation
from .evalcli.config import ExperimentConfig
from .evalcli.experiment import (
    CrossvalReport,
    FoldRecord,
    load_target,
    pretrain_on_source,
    resolve_pretrained,
    run_crossval,
    run_fold,
)
from .evalcli.metrics import ConfusionCounts, compute_metrics
from .features import write_feature_dump
from .pipeline import FeatureCache, Padding, SegmentKind, cycle_features

log = logging.getLogger("crackle")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "variant", None):
        changes["variant"] = args.variant
    if getattr(args, "seeds", None):
        changes["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    if getattr(args, "pretrained", None):
        changes["pretrained"] = args.pretrained
    if getattr(args, "source_dir", None):
        changes["source_dir"] = args.source_dir
    if getattr(args, "manifest", None):
        changes["target_manifest"] = args.manifest
    cfg = cfg.replace(**changes) if changes else cfg
    if getattr(args, "epochs", None) is not None:
        cfg.pretrain.epochs = args.epochs
        cfg.finetune.epochs = args.epochs
    return cfg


# -- subcommands --------------------------------------------------------------


def cmd_pretrain(args) -> int:
    from .dataio.icbhi import load_icbhi_dir

    cfg = _load_config(args)
    if not cfg.source_dir:
        raise DataError("pretraining needs --source-dir or source_dir in the config")
    variant = cfg.parsed_variant()
    pm, result = pretrain_on_source(cfg, load_icbhi_dir(cfg.source_dir), variant.padding)
    pm.provenance["config_hash"] = cfg.config_hash()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pm.save(out)
    _write_json(out.with_suffix(".results.json"), {
        "config_hash": cfg.config_hash(), "best_epoch": result.best_epoch,
        "best_val_acc": result.best_val_acc, "history": result.history,
        "fingerprint": pm.model.fingerprint(),
    })
    lines = [f"config {cfg.config_hash()}", f"{'epoch':>5s} {'loss':>10s} {'train_acc':>9s} {'val_acc':>8s}"]
    for h in result.history:
        val = h.get("val_acc")
        lines.append(f"{h['epoch']:5d} {h['train_loss']:10.5f} {h['train_acc']:9.4f} "
                     f"{'-' if val is None else format(val, '8.4f'):>8s}")
    lines.append(f"best epoch {result.best_epoch}; checkpoint {out}")
    out.with_suffix(".report.txt").write_text("\n".join(lines) + "\n")
    print(lines[-1])
    return EXIT_OK


def cmd_finetune(args) -> int:
    from .dataio.folds import build_folds
    from .nn import checkpoint

    cfg = _load_config(args)
    variant = cfg.parsed_variant()
    subjects, cycles = load_target(cfg)
    pm = None if variant.scratch else resolve_pretrained(cfg, variant)
    plan = build_folds(subjects, seed=cfg.fold_seed, n_folds=cfg.n_folds)
    if not 0 <= args.fold < len(plan):
        raise UsageError(f"fold must be in 0..{len(plan) - 1}")
    seed = cfg.seeds[0]
    record = run_fold(cfg, variant, plan[args.fold], args.fold, seed, cycles, FeatureCache(), pm, keep_model=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{variant.format()}.fold{args.fold}"
    checkpoint.save(record.model, out / f"{stem}.ckpt")
    report = CrossvalReport(variant.format(), cfg.config_hash(), [record])
    (out / f"{stem}.results.json").write_text(report.to_json())
    (out / f"{stem}.report.txt").write_text(report.report_text())
    print(report.report_text(), end="")
    return EXIT_OK


def cmd_crossval(args) -> int:
    cfg = _load_config(args)
    report = run_crossval(cfg)
    results, text = report.write(args.out)
    print(report.report_text(), end="")
    print(f"wrote {results} and {text}")
    return EXIT_OK


def cmd_features(args) -> int:
    from .dataio.wav import load_wav
    from .records import ClassLabel, Domain, RespiratoryCycle

    sig = load_wav(args.audio)
    if sig.sample_rate_hz != TARGET_RATE_HZ:
        sig = resample(sig, TARGET_RATE_HZ)
    start = int(round(args.start * TARGET_RATE_HZ)) if args.start is not None else 0
    end = int(round(args.end * TARGET_RATE_HZ)) if args.end is not None else len(sig)
    samples = sig.samples[start:end]
    if len(samples) == 0:
        raise DataError("selected time range holds no samples")
    kinds = [SegmentKind(k.strip()) for k in args.segments.split(",")]
    ratio = PhaseRatio.parse(args.ratio) if args.ratio else None
    if ratio is None and any(k is not SegmentKind.CYCLE for k in kinds):
        raise UsageError("phase segments need --ratio")
    cycle = RespiratoryCycle(AudioSignal(samples, TARGET_RATE_HZ), ClassLabel.NORMAL, "", Path(args.audio).stem,
                             0, Domain.TARGET)
    feats = cycle_features(cycle, kinds, ratio, Padding(args.padding))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, f in zip(kinds, feats):
        path = out / f"{Path(args.audio).stem}.{kind.value}.feat"
        write_feature_dump(path, f)
        written.append({"segment": kind.value, "path": path.name, "frames": f.shape[0], "bins": f.shape[1]})
        print(f"{kind.value}: {f.shape[0]}x{f.shape[1]} -> {path}")
    _write_json(out / "features.json", {"audio": str(args.audio), "padding": args.padding,
                                        "ratio": str(ratio) if ratio else None, "outputs": written})
    return EXIT_OK


def cmd_metrics(args) -> int:
    if args.results:
        try:
            data = json.loads(Path(args.results).read_text())
            records = [FoldRecord(r["variant"], r["run_seed"], r["fold"],
                                  ConfusionCounts(r["tp"], r["fp"], r["tn"], r["fn"]), r.get("best_epoch", 0))
                       for r in data["records"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{args.results} is not a results file: {exc}") from exc
        if not records:
            raise EmptyEvaluation("results file holds no records")
        report = CrossvalReport(data.get("variant", records[0].variant), data.get("config_hash", ""), records)
        text = report.report_text()
        payload = json.loads(report.to_json())
    else:
        if None in (args.tp, args.fp, args.tn, args.fn):
            raise UsageError("give --results or all of --tp --fp --tn --fn")
        counts = ConfusionCounts(args.tp, args.fp, args.tn, args.fn)
        m = compute_metrics(counts)
        payload = {**counts.as_dict(), **m.as_dict()}
        text = f"{'Se':>8s} {'P+':>8s} {'F-Score':>8s} {'Acc':>8s}\n{m.se:8.4f} {m.p_plus:8.4f} {m.f:8.4f} {m.accuracy:8.4f}\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        _write_json(out.with_suffix(".json"), payload)
        out.with_suffix(".txt").write_text(text)
    return EXIT_OK


def cmd_synth_data(args) -> int:
    from .dataio.synth import synth_dataset, synth_source_dataset, write_source_corpus, write_target_corpus

    out = Path(args.out)
    if args.domain == "source":
        n = args.subjects or 8
        cycles = synth_source_dataset(n, args.cycles, seed=args.seed)
        write_source_corpus(out, cycles)
        print(f"wrote {len(cycles)} source cycles from {n} subjects to {out}")
        return EXIT_OK
    if args.subjects is not None:
        n_crackle = args.subjects // 2
        n_normal = args.subjects - n_crackle
    else:
        n_normal, n_crackle = args.normal, args.crackle
    if n_normal < 1 or n_crackle < 1:
        raise UsageError("need at least one normal and one crackle subject")
    subjects, cycles = synth_dataset(n_normal, n_crackle, args.cycles, seed=args.seed)
    manifest = write_target_corpus(out, subjects, cycles)
    print(f"wrote {len(cycles)} cycles from {len(subjects)} subjects; manifest {manifest}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .nn.gradcheck import check_all_layers, check_full_model
    from .nn.model import ArchitectureSpec

    layers = check_all_layers(seed=args.seed)
    report = check_full_model(ArchitectureSpec(), seed=args.seed)
    worst = max(max(layers.values()), report.max_error)
    for name, err in layers.items():
        print(f"layer {name:22s} {err:.3e}")
    for line in report.lines():
        print(f"model {line}")
    print(f"kink coordinates replaced: {report.nudged}")
    print(f"max relative error {worst:.3e} ({'ok' if worst < args.tolerance else 'FAIL'})")
    if args.out:
        _write_json(Path(args.out), {"layers": layers, "model": report.errors, "nudged": report.nudged,
                                     "max_error": worst})
    return EXIT_OK if worst < args.tolerance else EXIT_USAGE


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crackle", description="Crackle detection with multi-input CNNs and transfer learning.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(sp):
        sp.add_argument("--config", help="YAML experiment config")
        sp.add_argument("--variant", help="variant name, e.g. 2ndConv_Cyc_Inp_Ratio_12_SamplePad")
        sp.add_argument("--epochs", type=int, help="override pretrain and fine-tune epochs")

    sp = sub.add_parser("pretrain", help="train the single-input model on a source corpus")
    experiment_args(sp)
    sp.add_argument("--source-dir")
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.set_defaults(func=cmd_pretrain)

    sp = sub.add_parser("finetune", help="fine-tune and test on one fold")
    experiment_args(sp)
    sp.add_argument("--manifest")
    sp.add_argument("--pretrained")
    sp.add_argument("--source-dir")
    sp.add_argument("--fold", type=int, default=0)
    sp.add_argument("--seeds", help="comma-separated; the first seed is used")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_finetune)

    sp = sub.add_parser("crossval", help="k-fold cross-validation over all seeds")
    experiment_args(sp)
    sp.add_argument("--manifest")
    sp.add_argument("--pretrained")
    sp.add_argument("--source-dir")
    sp.add_argument("--seeds", help="comma-separated run seeds")
    sp.add_argument("--out", default=".", help="output directory")
    sp.set_defaults(func=cmd_crossval)

    sp = sub.add_parser("features", help="dump normalised log-mel inputs for one cycle")
    sp.add_argument("audio")
    sp.add_argument("--start", type=float, help="cycle start in seconds")
    sp.add_argument("--end", type=float, help="cycle end in seconds")
    sp.add_argument("--segments", default="Cyc", help="comma list of Cyc, Ins, Exp")
    sp.add_argument("--ratio", help="phase split, e.g. 1:2")
    sp.add_argument("--padding", default="SamplePad", choices=[p.value for p in Padding])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("metrics", help="Se / P+ / F from counts or a results file")
    sp.add_argument("--results")
    for name in ("tp", "fp", "tn", "fn"):
        sp.add_argument(f"--{name}", type=int)
    sp.add_argument("--out", help="write <out>.json and <out>.txt")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("synth-data", help="write a synthetic corpus")
    sp.add_argument("--subjects", type=int, help="total subjects, split normal/crackle as N-N//2 / N//2")
    sp.add_argument("--normal", type=int, default=8)
    sp.add_argument("--crackle", type=int, default=7)
    sp.add_argument("--cycles", type=int, default=10, help="cycles per subject")
    sp.add_argument("--domain", choices=["target", "source"], default="target")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth_data)

    sp = sub.add_parser("gradcheck", help="finite-difference check of every layer and the full model")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--out", help="optional JSON output")
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"crackle {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"crackle {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (CrackleError, ValueError) as exc:
        print(f"crackle {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
