"""End-to-end orchestration: filter, segment, extract, split, select, train, evaluate.

The stage helpers here are shared by :func:`run_pipeline` and the individual
CLI subcommands, so running the stages one at a time from persisted
intermediates reproduces the one-shot run byte for byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .config import PipelineConfig, check_config
from .core import (DatasetManifest, FeatureMatrix, Recording, atomic_write_text,
                   format_feature_matrix, load_manifest, load_recording)
from .errors import ConfigError, EmgkitError, FormatError
from .evaluation import EvaluationReport, evaluate
from .features import build_feature_matrix, default_definitions, extract_features
from .filtering import apply_chain
from .models import TrainedModel, dumps_model, train_model
from .preprocess import SplitSpec, apply_minmax, fit_minmax, stratified_split
from .segmentation import Segment, SegmentationResult, extract_segment, pick_segment, segment_recording
from .selection import RankedFeatures, rfe_rank, select_by_name, select_columns


class StageError(EmgkitError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` holds the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """``map`` that keeps input order whatever the worker count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(min(threads, len(items))) as ex:
        return list(ex.map(fn, items))


# -- per-trial stages --------------------------------------------------------------

def segment_trial(rec: Recording, cfg: PipelineConfig) -> SegmentationResult:
    s = cfg.segmentation
    return segment_recording(rec, s.window_len, s.thresholds(), s.rest_s, s.k_start, s.k_stop,
                             s.min_s, s.max_s)


def trial_features(rec: Recording, seg: Segment, cfg: PipelineConfig) -> dict[str, float]:
    f = cfg.features
    defs = default_definitions(f.threshold_fraction, f.names)
    return extract_features(extract_segment(rec, seg), f.channels, defs)


@dataclass
class TrialOutcome:
    trial: str
    label: object
    result: SegmentationResult | None
    segment: Segment | None
    features: dict | None


def process_manifest(manifest: DatasetManifest, cfg: PipelineConfig, prefiltered: bool = False,
                     segments: dict[str, Segment | None] | None = None,
                     threads: int = 1) -> list[TrialOutcome]:
    """Filter (unless ``prefiltered``), segment and extract every trial in manifest order.

    With ``segments`` given, detection is skipped and those boundaries are used.
    Trials without an accepted segment come back with ``features = None``.
    """
    chain = None if prefiltered else cfg.filter.chain()

    def work(entry):
        rel, label = entry
        rec = load_recording(manifest.resolve(rel), trial_label=label)
        if chain is not None:
            rec = apply_chain(chain, rec)
        if segments is None:
            res = segment_trial(rec, cfg)
            seg = pick_segment(res.segments)
        else:
            res, seg = None, segments.get(str(rel))
        feats = trial_features(rec, seg, cfg) if seg is not None else None
        return TrialOutcome(str(rel), label, res, seg, feats)

    return parallel_map(work, manifest.entries, threads)


def segments_csv(outcomes: Sequence[TrialOutcome]) -> str:
    lines = ["trial,s,e,L,accepted"]
    for o in outcomes:
        for c in (o.result.candidates if o.result else ()):
            lines.append(f"{o.trial},{c.start},{c.end},{c.length},{int(c.accepted)}")
    return "\n".join(lines) + "\n"


def read_segments_csv(path) -> dict[str, Segment | None]:
    """Chosen segment per trial (longest accepted row) from a segments report."""
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "trial,s,e,L,accepted":
        raise FormatError(f"{path}: header must be trial,s,e,L,accepted")
    accepted: dict[str, list[Segment]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        if len(parts) != 5:
            raise FormatError(f"{path}: line {lineno}: expected 5 columns")
        try:
            s, e, acc = int(parts[1]), int(parts[2]), int(parts[4])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: non-integer field") from None
        lst = accepted.setdefault(parts[0], [])
        if acc:
            lst.append(Segment(s, e))
    return {t: pick_segment(v) for t, v in accepted.items()}


def feature_matrix(outcomes: Sequence[TrialOutcome]) -> tuple[FeatureMatrix, list[str]]:
    """Matrix of trials that yielded features, plus the ids of those that did not."""
    kept = [o for o in outcomes if o.features is not None]
    dropped = [o.trial for o in outcomes if o.features is None]
    if not kept:
        raise FormatError("no trial produced an accepted segment")
    return build_feature_matrix([o.features for o in kept], [o.label for o in kept]), dropped


# -- matrix stages -----------------------------------------------------------------

def split_stage(m: FeatureMatrix, cfg: PipelineConfig) -> tuple[FeatureMatrix, FeatureMatrix]:
    return stratified_split(m, SplitSpec(cfg.split.train_fraction, cfg.seed_for("split")))


def rank_stage(train: FeatureMatrix, cfg: PipelineConfig, k: int | None = None,
               threads: int = 1) -> RankedFeatures:
    """SVM-RFE on the min-max scaled training matrix."""
    sel = cfg.selection
    k = sel.k if k is None else k
    scaled = apply_minmax(fit_minmax(train), train)
    return rfe_rank(scaled.values, scaled.label_indices, sel.C, k, sel.step, sel.tol,
                    sel.max_iter, threads)


def ranking_csv(ranked: RankedFeatures, names: Sequence[str]) -> str:
    """Rank 1 is the strongest feature; scores are from each feature's last round."""
    scores = ranked.final_scores()
    lines = ["rank,feature_name,criterion_score"]
    for r, idx in enumerate(reversed(ranked.elimination_order), start=1):
        lines.append(f"{r},{names[idx]},{scores[idx]!r}")
    return "\n".join(lines) + "\n"


def read_ranking(path) -> list[str]:
    """Feature names ordered from rank 1 downwards."""
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].strip() != "rank,feature_name,criterion_score":
        raise FormatError(f"{path}: header must be rank,feature_name,criterion_score")
    ranked = []
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected 3 columns")
        ranked.append((int(parts[0]), parts[1]))
    return [n for _, n in sorted(ranked)]


def top_k_names(ranked_names: Sequence[str], all_names: Sequence[str], k: int) -> list[str]:
    """The ``k`` best features, in original column order."""
    keep = set(ranked_names[:k])
    return [n for n in all_names if n in keep]


def train_stage(train: FeatureMatrix, cfg: PipelineConfig, kind: str | None = None,
                threads: int = 1) -> TrainedModel:
    kind = cfg.classifier.model if kind is None else kind
    hyper = cfg.classifier.hyperparameters(kind, cfg.seed_for("mlp-init"))
    return train_model(kind, train, hyper, threads)


def sweep_k(train: FeatureMatrix, cfg: PipelineConfig, ks: Sequence[int], kind: str | None = None,
            threads: int = 1) -> list[tuple[int, float]]:
    """Holdout accuracy against feature count.

    The training matrix is split again (same fraction, ``cv`` seed); RFE runs
    once on the inner training part down to ``min(ks)`` and every ``k`` takes
    the top ``k`` of that ranking.
    """
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1 or ks[-1] > train.n_features:
        raise ConfigError(f"sweep values must lie in 1..{train.n_features}")
    inner_train, holdout = stratified_split(
        train, SplitSpec(cfg.split.train_fraction, cfg.seed_for("cv")))
    ranked = rank_stage(inner_train, cfg, ks[0], threads)
    out = []
    for k in ks:
        cols = list(ranked.top(k))
        model = train_stage(select_columns(inner_train, cols), cfg, kind, threads)
        out.append((k, evaluate(model, select_columns(holdout, cols)).accuracy))
    return out


# -- one-shot run ------------------------------------------------------------------

@dataclass
class PipelineResult:
    report: EvaluationReport
    model: TrainedModel
    ranked: RankedFeatures
    artifacts: dict[str, Path] = field(default_factory=dict)
    dropped_trials: list[str] = field(default_factory=list)


def _stage(name: str, fn: Callable, *args, **kw):
    try:
        return fn(*args, **kw)
    except EmgkitError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc
    except (OSError, ValueError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cfg: PipelineConfig, out_dir=None, threads: int | None = None,
                 log: Callable[[str], None] | None = None) -> PipelineResult:
    """Run every stage on ``cfg.paths.manifest`` and persist the artifacts in ``out_dir``.

    Artifacts: ``segments.csv``, ``features.csv``, ``train.csv``, ``test.csv``,
    ``ranking.csv``, ``model.json``, ``report.csv``, ``report.md`` and
    ``run_summary.json``. Each is written through a ``.partial`` file.
    """
    problems = check_config(cfg, require_manifest=True)
    if problems:
        raise ConfigError(problems)
    threads = cfg.run.threads if threads is None else threads
    out = Path(cfg.paths.out_dir if out_dir is None else out_dir)
    log = log or (lambda msg: None)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StageError("setup", exc) from exc
    paths: dict[str, Path] = {}

    def write(key: str, name: str, text: str):
        paths[key] = out / name
        _stage("write", atomic_write_text, out / name, text)

    manifest = _stage("manifest", load_manifest, cfg.paths.manifest)
    log(f"filter+segment+features: {len(manifest)} trials")
    outcomes = _stage("filter/segment/features", process_manifest, manifest, cfg, threads=threads)
    write("segments", "segments.csv", segments_csv(outcomes))
    fm, dropped = _stage("features", feature_matrix, outcomes)
    if dropped:
        log(f"{len(dropped)} trial(s) without an accepted segment were dropped")
    write("features", "features.csv", format_feature_matrix(fm))

    train, test = _stage("split", split_stage, fm, cfg)
    write("train", "train.csv", format_feature_matrix(train))
    write("test", "test.csv", format_feature_matrix(test))
    log(f"split: {train.n_rows} train / {test.n_rows} test")

    ranked = _stage("select", rank_stage, train, cfg, None, threads)
    write("ranking", "ranking.csv", ranking_csv(ranked, train.feature_names))
    names = [train.feature_names[i] for i in ranked.selected]
    log(f"select: kept {len(names)} of {train.n_features} features")

    model = _stage("train", train_stage, select_by_name(train, names), cfg, None, threads)
    write("model", "model.json", dumps_model(model))
    report = _stage("evaluate", evaluate, model, select_by_name(test, names), cfg.run.seed)
    write("report", "report.csv", report.to_csv())
    write("report_md", "report.md", report.to_markdown())
    log(f"evaluate: {model.kind} accuracy {report.accuracy_pct}%")

    summary = {
        "config_sha256": cfg.digest(),
        "config": cfg.to_ini(include_threads=False),
        "seed": cfg.run.seed,
        "sub_seeds": {n: cfg.seed_for(n) for n in ("split", "mlp-init")},
        "n_trials": len(manifest),
        "dropped_trials": dropped,
        "n_train": train.n_rows,
        "n_test": test.n_rows,
        "selected_features": names,
        "model": model.kind,
        "accuracy": report.accuracy,
        "artifacts": sorted(p.name for p in paths.values()),
    }
    write("summary", "run_summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return PipelineResult(report, model, ranked, paths, dropped)

