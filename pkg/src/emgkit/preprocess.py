"""Min-max feature scaling and stratified train/test splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ALL_LABELS, FeatureMatrix
from .errors import InvariantError, ParameterError

CLAMP_LOW, CLAMP_HIGH = -0.5, 1.5


@dataclass(frozen=True)
class NormalizationParams:
    feature_names: tuple[str, ...]
    x_min: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        lo = np.array(self.x_min, dtype=float)
        hi = np.array(self.x_max, dtype=float)
        if lo.shape != hi.shape or lo.shape != (len(self.feature_names),):
            raise InvariantError("x_min/x_max must have one entry per feature")
        if np.any(hi < lo):
            raise InvariantError("x_max must be >= x_min for every feature")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "x_min", lo)
        object.__setattr__(self, "x_max", hi)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names),
                "x_min": [float(v) for v in self.x_min],
                "x_max": [float(v) for v in self.x_max]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(tuple(d["feature_names"]), np.array(d["x_min"]), np.array(d["x_max"]))

    def subset(self, names) -> "NormalizationParams":
        idx = [self.feature_names.index(n) for n in names]
        return NormalizationParams(tuple(names), self.x_min[idx], self.x_max[idx])


def fit_minmax(train: FeatureMatrix) -> NormalizationParams:
    return NormalizationParams(train.feature_names, train.values.min(axis=0), train.values.max(axis=0))


def scale_values(params: NormalizationParams, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(params.feature_names):
        raise ValueError(
            f"expected {len(params.feature_names)} columns, got {values.shape[-1] if values.ndim else 0}")
    span = params.x_max - params.x_min
    degenerate = span == 0
    safe = np.where(degenerate, 1.0, span)
    out = (values - params.x_min) / safe
    out[:, degenerate] = 0.5
    return np.clip(out, CLAMP_LOW, CLAMP_HIGH)


def apply_minmax(params: NormalizationParams, m: FeatureMatrix) -> FeatureMatrix:
    """Scale to [0, 1] with training statistics.

    Constant training columns map to 0.5; values outside the training range
    are clamped to [-0.5, 1.5].
    """
    if m.feature_names != params.feature_names:
        if len(m.feature_names) != len(params.feature_names):
            raise ValueError(
                f"dimension mismatch: {m.n_features} columns vs {len(params.feature_names)} parameters")
        raise ValueError("feature names differ from the normalization parameters")
    return m.with_values(scale_values(params, m.values))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ParameterError("train_fraction must lie in (0, 1)")
        if not self.stratified:
            raise ParameterError("only stratified splitting is supported")


def class_train_count(n: int, fraction: float) -> int:
    """Round-half-up share of a class, kept within [1, n - 1]."""
    return min(max(int(math.floor(fraction * n + 0.5)), 1), n - 1)


def stratified_split(m: FeatureMatrix, spec: SplitSpec) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Seeded per-class shuffle; each class contributes round(fraction * size) training rows."""
    y = m.label_indices
    rng = np.random.default_rng(spec.seed)
    train_idx, test_idx = [], []
    for label in ALL_LABELS:
        rows = np.flatnonzero(y == label.index)
        if rows.size == 0:
            continue
        if rows.size < 2:
            raise ParameterError(f"class {label.value} has {rows.size} row; need at least 2")
        perm = rows[rng.permutation(rows.size)]
        k = class_train_count(rows.size, spec.train_fraction)
        train_idx.extend(perm[:k])
        test_idx.extend(perm[k:])
    return m.take_rows(np.sort(train_idx)), m.take_rows(np.sort(test_idx))
