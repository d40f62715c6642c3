"""``emgkit`` command line.

Exit status: 0 on success, 1 when inputs or configuration are invalid,
2 when a stage fails at run time.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, check_config, default_config_text, load_config
from .core import (atomic_write_text, format_feature_matrix, load_feature_matrix, load_manifest,
                   load_recording, save_recording, write_manifest)
from .errors import ConvergenceError, DivergenceError, EmgkitError
from .evaluation import evaluate
from .filtering import apply_chain, power_spectrum
from .models import MODEL_KINDS, load_model
from .pipeline import (StageError, feature_matrix, parallel_map, process_manifest, rank_stage,
                       ranking_csv, read_ranking, read_segments_csv, run_pipeline, segment_trial,
                       segments_csv, split_stage, sweep_k, top_k_names, train_stage, trial_features)
from .segmentation import pick_segment
from .selection import select_by_name
from .synth import SynthSpec, generate_corpus

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage mistakes are validation errors, not run-time failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="INI config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (overrides [run] seed)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker cap (overrides [run] threads)")
    p.add_argument("--print-defaults", action="store_true", default=argparse.SUPPRESS,
                   help="print the default config and exit")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = _Parser(prog="emgkit", parents=[common],
                 description="Offline sEMG movement-recognition toolkit.")
    ap.add_argument("--version", action="version", version=f"emgkit {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic labelled corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-class", type=int, default=60, help="trials per class (default 60)")

    p = sub.add_parser("filter", parents=[common], help="apply the notch + band-pass chain")
    p.add_argument("--in", dest="inp", required=True, help="recording CSV or manifest")
    p.add_argument("--out", required=True, help="output CSV, or directory for a manifest")
    p.add_argument("--report", help="spectrum CSV (frequency_hz, psd_before, psd_after)")

    p = sub.add_parser("segment", parents=[common], help="detect activity segments")
    p.add_argument("--in", dest="inp", required=True, help="recording CSV or manifest")
    p.add_argument("--th1", type=float, help="start threshold (default: calibrated)")
    p.add_argument("--th2", type=float, help="stop threshold (default: calibrated)")
    p.add_argument("--report", required=True, help="segments CSV (trial, s, e, L, accepted)")
    p.add_argument("--prefiltered", action="store_true", help="input is already filtered")

    p = sub.add_parser("features", parents=[common], help="extract the feature matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="features CSV")
    p.add_argument("--segments", help="reuse boundaries from a segments CSV")
    p.add_argument("--prefiltered", action="store_true", help="recordings are already filtered")

    p = sub.add_parser("split", parents=[common], help="stratified train/test split")
    p.add_argument("--features", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)

    p = sub.add_parser("select", parents=[common], help="rank features by SVM-RFE")
    p.add_argument("--train", required=True)
    p.add_argument("--k", type=int, help="features to keep (default from config)")
    p.add_argument("--out", required=True, help="ranking CSV (rank, feature_name, criterion_score)")
    p.add_argument("--sweep", help="feature-count range LO:HI for a holdout accuracy curve")
    p.add_argument("--sweep-out", help="CSV for the sweep (default: stdout)")
    p.add_argument("--model", choices=MODEL_KINDS, help="classifier used by the sweep")

    p = sub.add_parser("train", parents=[common], help="train a classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--model", choices=MODEL_KINDS, help="classifier kind (default from config)")
    p.add_argument("--ranking", help="ranking CSV; keeps the top --k features")
    p.add_argument("--k", type=int, help="features to keep (default from config)")
    p.add_argument("--out", required=True, help="model file")

    p = sub.add_parser("predict", parents=[common], help="label feature rows or a recording")
    p.add_argument("--model-file", required=True)
    p.add_argument("--in", dest="inp", required=True, help="features CSV or recording CSV")
    p.add_argument("--out", help="predictions CSV (default: stdout)")

    p = sub.add_parser("evaluate", parents=[common], help="score a model on a test matrix")
    p.add_argument("--model-file", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--report", help="report file (default: stdout)")
    p.add_argument("--format", choices=("csv", "md"), default="csv")

    p = sub.add_parser("pipeline", parents=[common], help="run every stage end to end")
    p.add_argument("--manifest", help="dataset manifest (overrides [paths] manifest)")
    p.add_argument("--out-dir", help="artifact directory (overrides [paths] out_dir)")
    p.add_argument("--model", choices=MODEL_KINDS, help="classifier kind (overrides config)")
    return ap


def _config(args) -> PipelineConfig:
    cfg = load_config(getattr(args, "config", None))
    if hasattr(args, "seed"):
        cfg = cfg.with_section("run", seed=args.seed)
    if hasattr(args, "threads"):
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = cfg.with_section("run", threads=args.threads)
    return cfg


def _emit(text: str, path) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _is_recording(path) -> bool:
    with open(path) as fh:
        return fh.readline().strip().startswith("t,")


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args, cfg):
    if args.per_class < 2:
        raise UsageError("--per-class must be >= 2")
    spec = SynthSpec(sample_rate_hz=cfg.filter.sample_rate_hz)
    manifest = generate_corpus(spec, args.per_class, args.out, cfg.seed_for("synth"), cfg.run.threads)
    print(f"wrote {8 * args.per_class} trials; manifest {manifest}")


def cmd_filter(args, cfg):
    chain = cfg.filter.chain()
    if _is_recording(args.inp):
        rec = load_recording(args.inp)
        out = apply_chain(chain, rec)
        save_recording(out, args.out)
        if args.report:
            f = power_spectrum(rec.samples[0], rec.sample_rate_hz)[0]
            before = np.mean([power_spectrum(x, rec.sample_rate_hz)[1] for x in rec.samples], axis=0)
            after = np.mean([power_spectrum(x, rec.sample_rate_hz)[1] for x in out.samples], axis=0)
            lines = ["frequency_hz,psd_before,psd_after"]
            lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(f, before, after)]
            atomic_write_text(args.report, "\n".join(lines) + "\n")
        return
    if args.report:
        raise UsageError("--report needs a single recording as --in")
    manifest = load_manifest(args.inp)
    out_dir = Path(args.out)

    def work(entry):
        rel, label = entry
        rec = apply_chain(chain, load_recording(manifest.resolve(rel), trial_label=label))
        save_recording(rec, out_dir / rel)
        return str(rel), label

    for rel, _ in manifest.entries:
        (out_dir / rel).parent.mkdir(parents=True, exist_ok=True)
    done = parallel_map(work, manifest.entries, cfg.run.threads)
    write_manifest(done, out_dir / "manifest.txt")
    print(f"filtered {len(done)} trials into {out_dir}")


def _threshold_cfg(args, cfg):
    if (args.th1 is None) != (args.th2 is None):
        raise UsageError("--th1 and --th2 must be given together")
    if args.th1 is not None:
        cfg = cfg.with_section("segmentation", th1=args.th1, th2=args.th2)
        problems = [p for p in check_config(cfg) if "Thresholds" in p]
        if problems:
            raise UsageError("; ".join(problems))
    return cfg


def cmd_segment(args, cfg):
    cfg = _threshold_cfg(args, cfg)
    if _is_recording(args.inp):
        rec = load_recording(args.inp)
        if not args.prefiltered:
            rec = apply_chain(cfg.filter.chain(), rec)
        res = segment_trial(rec, cfg)
        lines = ["trial,s,e,L,accepted"]
        lines += [f"{Path(args.inp).name},{c.start},{c.end},{c.length},{int(c.accepted)}"
                  for c in res.candidates]
        atomic_write_text(args.report, "\n".join(lines) + "\n")
        n = len(res.segments)
    else:
        manifest = load_manifest(args.inp)
        outcomes = process_manifest(manifest, cfg, args.prefiltered, threads=cfg.run.threads)
        atomic_write_text(args.report, segments_csv(outcomes))
        n = sum(o.segment is not None for o in outcomes)
        print(f"{n}/{len(outcomes)} trials have an accepted segment")
        return
    print(f"{n} accepted segment(s)")


def cmd_features(args, cfg):
    manifest = load_manifest(args.manifest)
    segs = read_segments_csv(args.segments) if args.segments else None
    outcomes = process_manifest(manifest, cfg, args.prefiltered, segs, cfg.run.threads)
    fm, dropped = feature_matrix(outcomes)
    atomic_write_text(args.out, format_feature_matrix(fm))
    for t in dropped:
        print(f"warning: {t}: no accepted segment, trial skipped", file=sys.stderr)
    print(f"{fm.n_rows} x {fm.n_features} feature matrix written to {args.out}")


def cmd_split(args, cfg):
    fm = load_feature_matrix(args.features)
    train, test = split_stage(fm, cfg)
    atomic_write_text(args.train, format_feature_matrix(train))
    atomic_write_text(args.test, format_feature_matrix(test))
    print(f"{train.n_rows} train / {test.n_rows} test")


def _parse_range(text: str) -> list[int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--sweep expects LO:HI, got {text!r}") from None
    if not 1 <= lo <= hi:
        raise UsageError("--sweep needs 1 <= LO <= HI")
    return list(range(lo, hi + 1))


def cmd_select(args, cfg):
    train = load_feature_matrix(args.train)
    k = cfg.selection.k if args.k is None else args.k
    if not 1 <= k <= train.n_features:
        raise UsageError(f"--k must lie in 1..{train.n_features}")
    ks = _parse_range(args.sweep) if args.sweep else None
    if ks and ks[-1] > train.n_features:
        raise UsageError(f"--sweep upper bound exceeds the {train.n_features} available features")
    ranked = rank_stage(train, cfg, k, cfg.run.threads)
    atomic_write_text(args.out, ranking_csv(ranked, train.feature_names))
    if ks:
        curve = sweep_k(train, cfg, ks, args.model, cfg.run.threads)
        _emit("k,cv_accuracy\n" + "".join(f"{k},{acc!r}\n" for k, acc in curve), args.sweep_out)


def cmd_train(args, cfg):
    train = load_feature_matrix(args.train)
    if args.ranking:
        k = cfg.selection.k if args.k is None else args.k
        ranked = read_ranking(args.ranking)
        if not 1 <= k <= len(ranked):
            raise UsageError(f"--k must lie in 1..{len(ranked)}")
        train = select_by_name(train, top_k_names(ranked, train.feature_names, k))
    model = train_stage(train, cfg, args.model, cfg.run.threads)
    model.save(args.out)
    print(f"{model.kind} model on {len(model.feature_names)} features written to {args.out}")


def cmd_predict(args, cfg):
    model = load_model(args.model_file)
    if _is_recording(args.inp):
        rec = apply_chain(cfg.filter.chain(), load_recording(args.inp))
        seg = pick_segment(segment_trial(rec, cfg).segments)
        if seg is None:
            raise StageError("segment", ValueError(f"{args.inp}: no accepted activity segment"))
        pred = [model.predict_vector(trial_features(rec, seg, cfg))]
        ids, truth = [Path(args.inp).name], [""]
    else:
        fm = load_feature_matrix(args.inp)
        pred = model.predict(fm)
        ids = [str(i) for i in range(fm.n_rows)]
        truth = [l.value for l in fm.labels]
    lines = ["row,predicted,label"]
    lines += [f"{i},A{p + 1},{t}" for i, p, t in zip(ids, pred, truth)]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_evaluate(args, cfg):
    model = load_model(args.model_file)
    report = evaluate(model, load_feature_matrix(args.test), cfg.run.seed)
    _emit(report.to_markdown() if args.format == "md" else report.to_csv(), args.report)


def cmd_pipeline(args, cfg):
    if args.manifest:
        cfg = cfg.with_section("paths", manifest=args.manifest)
    if args.out_dir:
        cfg = cfg.with_section("paths", out_dir=args.out_dir)
    if args.model:
        cfg = cfg.with_section("classifier", model=args.model)
    res = run_pipeline(cfg, log=lambda m: print(m, file=sys.stderr))
    print(res.report.to_markdown(), end="")


COMMANDS = {"synth": cmd_synth, "filter": cmd_filter, "segment": cmd_segment,
            "features": cmd_features, "split": cmd_split, "select": cmd_select,
            "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "pipeline": cmd_pipeline}

_RUNTIME = (ConvergenceError, DivergenceError, MemoryError)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    # honoured anywhere on the line, even when a subcommand's required options are absent
    if "--print-defaults" in argv:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    try:
        cfg = _config(args)
        COMMANDS[args.command](args, cfg)
    except StageError as exc:
        print(f"emgkit {args.command}: {exc}", file=sys.stderr)
        invalid = isinstance(exc.cause, EmgkitError) and not isinstance(exc.cause, _RUNTIME)
        return EXIT_INVALID if invalid and exc.stage == "manifest" else EXIT_RUNTIME
    except (UsageError, FileNotFoundError) as exc:
        print(f"emgkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _RUNTIME as exc:
        print(f"emgkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (EmgkitError, ValueError) as exc:
        print(f"emgkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"emgkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
