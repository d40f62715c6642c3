"""Confusion matrices, accuracy reports and per-run aggregation."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ALL_LABELS, N_CLASSES, FeatureMatrix
from .errors import InvariantError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes (A1..A8)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (N_CLASSES, N_CLASSES) or np.any(c < 0):
            raise InvariantError("confusion counts must be a non-negative 8x8 array")
        c = c.astype(int)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        c = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
        np.add.at(c, (np.asarray(y_true, int), np.asarray(y_pred, int)), 1)
        return cls(c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recall(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        diag = np.diag(self.counts)
        return np.divide(diag, rows, out=np.zeros(N_CLASSES), where=rows > 0)

    def off_diagonal_pairs(self) -> list[tuple[int, int, int]]:
        """Unordered class pairs ranked by their combined confusion count."""
        c = self.counts
        pairs = [(int(c[a, b] + c[b, a]), a, b)
                 for a in range(N_CLASSES) for b in range(a + 1, N_CLASSES)]
        pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
        return [(a, b, n) for n, a, b in pairs]


@dataclass(frozen=True)
class EvaluationReport:
    confusion: ConfusionMatrix
    model_meta: dict = field(default_factory=dict)
    seed: int | None = None

    @property
    def accuracy(self) -> float:
        t = self.confusion.total
        return float(np.trace(self.confusion.counts)) / t if t else 0.0

    @property
    def per_class_recall(self) -> np.ndarray:
        return self.confusion.recall()

    @property
    def accuracy_pct(self) -> str:
        return f"{100 * self.accuracy:.2f}"

    def to_csv(self) -> str:
        lines = ["key,value"]
        for k, v in sorted(self.model_meta.items()):
            lines.append(f"{k},{v}")
        lines.append(f"seed,{'' if self.seed is None else self.seed}")
        lines.append(f"n_test,{self.confusion.total}")
        lines.append(f"correct,{int(np.trace(self.confusion.counts))}")
        lines.append(f"accuracy,{self.accuracy!r}")
        lines.append(f"accuracy_pct,{self.accuracy_pct}")
        for lab, r in zip(ALL_LABELS, self.per_class_recall):
            lines.append(f"recall_{lab.value},{100 * r:.2f}")
        lines.append("")
        lines.append("true\\pred," + ",".join(l.value for l in ALL_LABELS))
        for lab, row in zip(ALL_LABELS, self.confusion.counts):
            lines.append(lab.value + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_markdown(self) -> str:
        title = self.model_meta.get("kind", "model")
        head = "| true \\ pred | " + " | ".join(l.value for l in ALL_LABELS) + " | recall (%) |"
        sep = "|" + "---|" * (N_CLASSES + 2)
        rows = [f"| {lab.value} | " + " | ".join(str(int(v)) for v in row) + f" | {100 * r:.2f} |"
                for lab, row, r in zip(ALL_LABELS, self.confusion.counts, self.per_class_recall)]
        return "\n".join([f"## {title}: accuracy {self.accuracy_pct}% "
                          f"({int(np.trace(self.confusion.counts))}/{self.confusion.total})",
                          "", head, sep, *rows]) + "\n"


def evaluate_predictions(y_true, y_pred, model_meta: dict | None = None,
                         seed: int | None = None) -> EvaluationReport:
    return EvaluationReport(ConfusionMatrix.from_predictions(y_true, y_pred),
                            dict(model_meta or {}), seed)


def evaluate(model, test: FeatureMatrix, seed: int | None = None) -> EvaluationReport:
    """Score a trained model on ``test``; ``model`` needs ``predict`` and ``kind``."""
    pred = model.predict(test)
    meta = {"kind": model.kind}
    return evaluate_predictions(test.label_indices, pred, meta, seed)


def aggregate(reports: Sequence[EvaluationReport], run_key: str = "run") -> "SummaryTable":
    """Unweighted mean accuracy per classifier over runs (subjects, seeds, ...)."""
    if not reports:
        raise ValueError("aggregate needs at least one report")
    grid: "OrderedDict[str, dict]" = OrderedDict()
    kinds = []
    for i, r in enumerate(reports):
        kind = str(r.model_meta.get("kind", "model"))
        run = str(r.model_meta.get(run_key, i + 1))
        if kind not in kinds:
            kinds.append(kind)
        grid.setdefault(run, {})[kind] = r.accuracy
    kinds.sort()
    runs = sorted(grid, key=_natural_key)
    means = {}
    for k in kinds:
        vals = sorted(grid[run][k] for run in runs if k in grid[run])
        means[k] = float(np.mean(vals))
    return SummaryTable(tuple(kinds), tuple(runs), {r: dict(grid[r]) for r in runs}, means)


def _natural_key(s: str):
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


@dataclass(frozen=True)
class SummaryTable:
    kinds: tuple[str, ...]
    runs: tuple[str, ...]
    accuracy: dict
    mean_accuracy: dict

    def mean_pct(self, kind: str) -> float:
        return 100 * self.mean_accuracy[kind]

    def to_markdown(self) -> str:
        head = "| Run/Classifier | " + " | ".join(k.upper() for k in self.kinds) + " |"
        sep = "|" + "---|" * (len(self.kinds) + 1)
        rows = []
        for run in self.runs:
            cells = [f"{100 * self.accuracy[run][k]:.2f}" if k in self.accuracy[run] else "-"
                     for k in self.kinds]
            rows.append(f"| {run} | " + " | ".join(cells) + " |")
        rows.append("| Average (%) | " + " | ".join(f"{self.mean_pct(k):.2f}" for k in self.kinds) + " |")
        return "\n".join([head, sep, *rows]) + "\n"
