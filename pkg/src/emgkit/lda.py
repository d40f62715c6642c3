"""Linear discriminant analysis with a shared, shrinkage-regularised covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, ParameterError


@dataclass(frozen=True)
class LdaModel:
    classes: tuple[int, ...]
    class_means: np.ndarray        # (n_classes, d)
    pooled_covariance: np.ndarray  # (d, d), regularised
    priors: np.ndarray
    shrinkage: float

    def __post_init__(self):
        cov = self.pooled_covariance
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise InvariantError("covariance must be symmetric")
        if abs(self.priors.sum() - 1) > 1e-12:
            raise InvariantError("priors must sum to 1")

    def discriminants(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.class_means.shape[1]:
            raise ValueError(f"expected {self.class_means.shape[1]} columns, got {X.shape[1]}")
        sol = np.linalg.solve(self.pooled_covariance, self.class_means.T)  # Sigma^-1 mu_c
        const = -0.5 * np.sum(self.class_means.T * sol, axis=0) + np.log(self.priors)
        return X @ sol + const

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum, i.e. the lower class id on ties
        return np.asarray(self.classes)[np.argmax(self.discriminants(X), axis=1)]


def pooled_within_covariance(X, y) -> tuple[tuple[int, ...], np.ndarray, np.ndarray]:
    """Class ids, class means and the within-class covariance (N - K denominator)."""
    classes = tuple(int(c) for c in np.unique(y))
    means = np.array([X[y == c].mean(axis=0) for c in classes])
    centred = X - means[np.searchsorted(classes, y)]
    dof = len(X) - len(classes)
    cov = centred.T @ centred / dof
    return classes, means, (cov + cov.T) / 2


def train_lda(X, y, shrinkage: float = 1e-3) -> LdaModel:
    """Fit means, priors and ``S_w + shrinkage * (trace(S_w)/d) * I``.

    If ``S_w`` is identically zero the ridge falls back to ``shrinkage * I``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if shrinkage < 0:
        raise ParameterError("shrinkage must be non-negative")
    counts = np.bincount(y)
    present = counts[counts > 0]
    if present.size == 0 or present.min() < 2:
        raise ParameterError("every class needs at least 2 training rows")
    classes, means, cov = pooled_within_covariance(X, y)
    d = X.shape[1]
    tr = float(np.trace(cov))
    ridge = shrinkage * (tr / d if tr > 0 else 1.0)
    cov = cov + ridge * np.eye(d)
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise InvariantError("covariance is singular after regularisation; raise the shrinkage")
    priors = np.array([np.mean(y == c) for c in classes])
    return LdaModel(classes, means, cov, priors / priors.sum(), float(shrinkage))
