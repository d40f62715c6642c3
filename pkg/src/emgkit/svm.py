"""Soft-margin SVM trained on the dual by sequential two-variable optimisation.

Solves

    min_a  1/2 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  y'a = 0,
    Q_ij = y_i y_j K(x_i, x_j)

with maximal-violating-pair working sets chosen by second-order gain
(Fan, Chen & Lin, JMLR 2005). Ties in the working-set choice go to the
lowest row index, so training is deterministic.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceError, ParameterError

_TAU = 1e-12


@dataclass(frozen=True)
class Kernel:
    kind: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ParameterError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ParameterError("rbf gamma must be positive")

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(A)
        B = np.atleast_2d(B)
        if self.kind == "linear":
            return A @ B.T
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-self.gamma * np.maximum(sq, 0.0))

    def to_dict(self):
        return {"kind": self.kind, "gamma": float(self.gamma)}


def rbf_gamma(X: np.ndarray) -> float:
    """``1 / (n_features * var(X))``, the usual data-scaled RBF width."""
    v = float(np.var(X))
    return 1.0 / (X.shape[1] * v) if v > 0 else 1.0


@dataclass(frozen=True)
class SvmDualSolution:
    alphas: np.ndarray
    bias: float
    y: np.ndarray          # +-1 labels of the training rows
    X: np.ndarray          # training rows (needed by the kernel expansion)
    kernel: Kernel
    C: float
    kkt_residual: float
    iterations: int

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)

    @property
    def coef(self) -> np.ndarray:
        """``alpha_i * y_i`` per training row."""
        return self.alphas * self.y

    def weights(self) -> np.ndarray:
        """Primal weight vector; only meaningful for the linear kernel."""
        if self.kernel.kind != "linear":
            raise ParameterError("primal weights exist only for the linear kernel")
        return self.coef @ self.X

    def decision_function(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        sv = self.support_indices
        if sv.size == 0:
            return np.full(rows.shape[0], self.bias)
        return self.kernel(rows, self.X[sv]) @ self.coef[sv] + self.bias

    def compact(self) -> "SvmDualSolution":
        """Copy restricted to the support vectors (same decision function)."""
        sv = self.support_indices
        return SvmDualSolution(self.alphas[sv], self.bias, self.y[sv], self.X[sv], self.kernel,
                               self.C, self.kkt_residual, self.iterations)


def train_svm_dual(X, y, C: float = 1.0, kernel: Kernel = Kernel(), tol: float = 1e-6,
                   max_iter: int = 100_000) -> SvmDualSolution:
    """Binary SVM; ``y`` holds +1/-1.

    Stops when the maximal KKT violation ``m(a) - M(a)`` drops to ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not C > 0:
        raise ParameterError("C must be positive")
    if X.ndim != 2 or len(X) != len(y):
        raise ParameterError("X must be 2-D with one label per row")
    if not (np.any(y == 1) and np.any(y == -1)) or np.any(np.abs(y) != 1):
        raise ParameterError("labels must be +-1 with at least one row of each class")
    n = len(y)
    K = kernel(X, X)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    residual = np.inf
    it = 0
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        v = -y * G
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        gmax = vu[i]
        vl = np.where(low, v, np.inf)
        residual = max(0.0, float(gmax - vl.min()))
        if residual <= tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT residual {residual:.3e})",
                residual)
        # second-order choice of j among violators in I_low
        b = gmax - v
        cand = low & (b > 0)
        a = QD[i] + QD - 2 * y[i] * y * Q[i]
        a = np.where(a > 0, a, _TAU)
        gain = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(gain))
        _update_pair(i, j, alpha, y, Q, QD, G, C)
        it += 1

    free = (alpha > 0) & (alpha < C)
    yg = y * G
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub, lb = np.inf, -np.inf
        at_upper, at_lower = alpha >= C, alpha <= 0
        m1 = (at_upper & (y < 0)) | (at_lower & (y > 0))
        m2 = (at_upper & (y > 0)) | (at_lower & (y < 0))
        if m1.any():
            ub = float(yg[m1].min())
        if m2.any():
            lb = float(yg[m2].max())
        rho = (ub + lb) / 2
    return SvmDualSolution(alpha, -rho, y, X, kernel, float(C), residual, it)


def _update_pair(i, j, alpha, y, Q, QD, G, C):
    """Analytic two-variable step with box clipping (LIBSVM update rules)."""
    ai_old, aj_old = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = QD[i] + QD[j] + 2 * Q[i, j]
        quad = quad if quad > 0 else _TAU
        delta = (-G[i] - G[j]) / quad
        diff = ai_old - aj_old
        ai, aj = ai_old + delta, aj_old + delta
        if diff > 0:
            if aj < 0:
                aj, ai = 0.0, diff
        elif ai < 0:
            ai, aj = 0.0, -diff
        if diff > 0:
            if ai > C:
                ai, aj = C, C - diff
        elif aj > C:
            aj, ai = C, C + diff
    else:
        quad = QD[i] + QD[j] - 2 * Q[i, j]
        quad = quad if quad > 0 else _TAU
        delta = (G[i] - G[j]) / quad
        s = ai_old + aj_old
        ai, aj = ai_old - delta, aj_old + delta
        if s > C:
            if ai > C:
                ai, aj = C, s - C
        elif aj < 0:
            aj, ai = 0.0, s
        if s > C:
            if aj > C:
                aj, ai = C, s - C
        elif ai < 0:
            ai, aj = 0.0, s
    alpha[i], alpha[j] = ai, aj
    G += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)


def margin_weight_sq(sol: SvmDualSolution, X=None, y=None, drop_feature: Optional[int] = None) -> float:
    """``sum_ij a_i a_j y_i y_j K(x_i, x_j)``, optionally with one feature removed from K."""
    X = sol.X if X is None else np.asarray(X, dtype=float)
    y = sol.y if y is None else np.asarray(y, dtype=float)
    if drop_feature is not None:
        X = np.delete(X, drop_feature, axis=1)
    c = sol.alphas * y
    return float(c @ sol.kernel(X, X) @ c)


# -- one-vs-one multiclass -----------------------------------------------------------

@dataclass(frozen=True)
class SvmMulticlassModel:
    classes: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    machines: tuple[SvmDualSolution, ...]  # machine k: +1 = pairs[k][0]

    def decision_matrix(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        return np.column_stack([m.decision_function(rows) for m in self.machines])

    def predict(self, rows) -> np.ndarray:
        return vote(self.decision_matrix(rows), self.pairs, self.classes)


def vote(decisions: np.ndarray, pairs: Sequence[tuple[int, int]], classes: Sequence[int]) -> np.ndarray:
    """Majority vote; ties go to the larger summed signed decision value, then lower class."""
    classes = list(classes)
    pos = {c: k for k, c in enumerate(classes)}
    n = decisions.shape[0]
    votes = np.zeros((n, len(classes)))
    sums = np.zeros((n, len(classes)))
    for k, (a, b) in enumerate(pairs):
        d = decisions[:, k]
        votes[:, pos[a]] += d > 0
        votes[:, pos[b]] += d <= 0
        sums[:, pos[a]] += d
        sums[:, pos[b]] -= d
    out = np.empty(n, dtype=int)
    for r in range(n):
        best = np.flatnonzero(votes[r] == votes[r].max())
        if best.size > 1:
            s = sums[r, best]
            best = best[s == s.max()]
        out[r] = classes[int(best[0])]
    return out


def _pair_data(X, y, a, b):
    mask = (y == a) | (y == b)
    return X[mask], np.where(y[mask] == a, 1.0, -1.0)


def train_ovo(X, y, C: float = 1.0, kernel: Kernel = Kernel(), tol: float = 1e-6,
              max_iter: int = 100_000, threads: int = 1) -> SvmMulticlassModel:
    """One binary machine per unordered class pair; ``y`` holds integer classes."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ParameterError("need at least two classes")
    pairs = tuple(itertools.combinations(classes, 2))

    def fit(pair):
        Xp, yp = _pair_data(X, y, *pair)
        return train_svm_dual(Xp, yp, C, kernel, tol, max_iter)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            machines = tuple(ex.map(fit, pairs))
    else:
        machines = tuple(map(fit, pairs))
    return SvmMulticlassModel(classes, pairs, machines)
