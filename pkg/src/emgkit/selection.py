"""SVM-RFE feature ranking.

Each round trains one-vs-one linear SVMs on the surviving features and
scores feature ``p`` by how much the margin term ``S^2 = sum a_i a_j y_i y_j
K(x_i, x_j)`` changes when ``p`` is dropped from the kernel, summed over the
class pairs. For a linear kernel that change is exactly ``w_p^2``. The
lowest-scoring features are removed until ``k_target`` remain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FeatureMatrix
from .errors import InvariantError, ParameterError
from .svm import Kernel, SvmMulticlassModel, margin_weight_sq, train_ovo

LINEAR = Kernel("linear")


@dataclass(frozen=True)
class RankedFeatures:
    """Outcome of one RFE run.

    ``elimination_order`` lists every feature index, first eliminated first;
    survivors follow in ascending order of their final score, so the last
    entry is the strongest feature. ``criterion_scores[r]`` maps each feature
    alive in round ``r`` to its summed criterion.
    """

    elimination_order: tuple[int, ...]
    criterion_scores: tuple[dict, ...]
    selected: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.elimination_order) != list(range(len(self.elimination_order))):
            raise InvariantError("elimination_order must be a permutation of feature indices")

    @property
    def n_features(self) -> int:
        return len(self.elimination_order)

    def top(self, k: int) -> tuple[int, ...]:
        """The ``k`` strongest features, in original column order."""
        if not 1 <= k <= self.n_features:
            raise ParameterError(f"k must lie in 1..{self.n_features}")
        return tuple(sorted(self.elimination_order[-k:]))

    def final_scores(self) -> dict[int, float]:
        """Each feature's score in the last round it took part in."""
        out = {}
        for round_scores in self.criterion_scores:
            out.update(round_scores)
        return out


def linear_criteria(model: SvmMulticlassModel) -> np.ndarray:
    """Per-feature ``w_p^2`` summed over the pairwise machines."""
    return sum(m.weights() ** 2 for m in model.machines)


def removal_criterion(machine, p: int) -> float:
    """``|S^2 - S^2_(-p)|`` by explicit double sums over the training rows."""
    return abs(margin_weight_sq(machine) - margin_weight_sq(machine, drop_feature=p))


def verify_linear_identity(model: SvmMulticlassModel, rtol: float = 1e-9) -> float:
    """Check ``removal_criterion == w_p^2`` for every machine and feature.

    Returns the largest relative deviation; raises if it exceeds ``rtol``.
    """
    worst = 0.0
    for m in model.machines:
        w2 = m.weights() ** 2
        scale = max(margin_weight_sq(m), np.finfo(float).tiny)
        for p in range(len(w2)):
            dev = abs(removal_criterion(m, p) - w2[p]) / scale
            worst = max(worst, dev)
    if worst > rtol:
        raise InvariantError(f"linear criterion identity violated: relative deviation {worst:.3e}")
    return worst


def rfe_rank(X, y, C: float = 1.0, k_target: int = 25, step: int = 1, tol: float = 1e-6,
             max_iter: int = 100_000, threads: int = 1, verify: bool = False) -> RankedFeatures:
    """Recursive feature elimination down to ``k_target`` features.

    ``y`` holds integer class ids. Ties are eliminated lowest index first.
    ``k_target`` equal to the feature count scores one round and removes nothing.
    With ``verify=True`` every round also checks the ``w_p^2`` identity and
    the dual feasibility of every machine.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n_feat = X.shape[1]
    if not 1 <= k_target <= n_feat:
        raise ParameterError(f"k_target must be in 1..{n_feat}, got {k_target}")
    if step < 1:
        raise ParameterError("step must be >= 1")
    alive = list(range(n_feat))
    eliminated: list[int] = []
    rounds = []
    while True:
        model = train_ovo(X[:, alive], y, C, LINEAR, tol, max_iter, threads)
        if verify:
            _check_round(model, tol)
        scores = linear_criteria(model)
        rounds.append({f: float(s) for f, s in zip(alive, scores)})
        # stable sort: equal scores keep ascending feature index
        order = sorted(range(len(alive)), key=lambda i: scores[i])
        if len(alive) == k_target:
            survivors = [alive[i] for i in order]
            break
        n_drop = min(step, len(alive) - k_target)
        drop = {alive[i] for i in order[:n_drop]}
        eliminated += [alive[i] for i in order[:n_drop]]
        alive = [f for f in alive if f not in drop]
    return RankedFeatures(tuple(eliminated + survivors), tuple(rounds), tuple(sorted(survivors)))


def _check_round(model: SvmMulticlassModel, tol: float) -> None:
    verify_linear_identity(model)
    for m in model.machines:
        if abs(float(m.alphas @ m.y)) > 1e-8:
            raise InvariantError("dual equality constraint violated")
        if np.any(m.alphas < 0) or np.any(m.alphas > m.C):
            raise InvariantError("dual box constraint violated")
        if m.kkt_residual > tol:
            raise InvariantError(f"KKT residual {m.kkt_residual:.3e} above tolerance")


def select_columns(m: FeatureMatrix, selected: Sequence[int]) -> FeatureMatrix:
    """Column subset, kept in the given order."""
    idx = [int(i) for i in selected]
    if not idx:
        raise ParameterError("selection must be non-empty")
    bad = [i for i in idx if not 0 <= i < m.n_features]
    if bad:
        raise IndexError(f"feature index {bad[0]} out of range 0..{m.n_features - 1}")
    return FeatureMatrix(tuple(m.feature_names[i] for i in idx), m.values[:, idx], m.labels)


def select_by_name(m: FeatureMatrix, names: Sequence[str]) -> FeatureMatrix:
    missing = [n for n in names if n not in m.feature_names]
    if missing:
        raise ValueError(f"feature(s) missing from matrix: {', '.join(missing)}")
    return select_columns(m, [m.feature_names.index(n) for n in names])
