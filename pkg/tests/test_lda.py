import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from emgkit.errors import ParameterError
from emgkit.lda import pooled_within_covariance, train_lda


def clouds(rng, means, n=100, scale=1.0):
    means = np.asarray(means, float)
    y = np.repeat(np.arange(len(means)), n)
    return means[y] + scale * rng.normal(size=(len(y), means.shape[1])), y


def test_isotropic_boundary_is_perpendicular_bisector():
    rng = np.random.default_rng(0)
    m0, m1 = np.array([0.0, 0.0]), np.array([4.0, 2.0])
    X, y = clouds(rng, [m0, m1], n=500)
    model = train_lda(X, y)
    sol = np.linalg.solve(model.pooled_covariance, model.class_means.T)
    normal = sol[:, 1] - sol[:, 0]
    d = m1 - m0
    angle = math.degrees(math.acos(normal @ d / np.linalg.norm(normal) / np.linalg.norm(d)))
    assert angle < 5
    g = model.discriminants((m0 + m1) / 2)[0]
    assert abs(g[1] - g[0]) < 0.1 * np.linalg.norm(normal) * np.linalg.norm(d)


def test_naive_two_pass_covariance():
    rng = np.random.default_rng(1)
    X, y = clouds(rng, [[0, 0, 0], [1, 2, 3], [3, 1, 0]], n=15)
    _, means, cov = pooled_within_covariance(X, y)
    ref = np.zeros((3, 3))
    for c in range(3):
        rows = X[y == c]
        mu = [sum(r[k] for r in rows) / len(rows) for k in range(3)]
        assert np.allclose(means[c], mu, rtol=1e-12)
        for r in rows:
            for a in range(3):
                for b in range(3):
                    ref[a, b] += (r[a] - mu[a]) * (r[b] - mu[b])
    ref /= len(X) - 3
    assert np.allclose(cov, ref, rtol=1e-9, atol=0)


def test_regularised_covariance():
    rng = np.random.default_rng(2)
    X, y = clouds(rng, [[0, 0], [2, 2]], n=20)
    _, _, cov = pooled_within_covariance(X, y)
    model = train_lda(X, y, shrinkage=0.1)
    assert np.allclose(model.pooled_covariance, cov + 0.1 * np.trace(cov) / 2 * np.eye(2))
    assert np.array_equal(model.pooled_covariance, model.pooled_covariance.T)
    assert np.linalg.eigvalsh(model.pooled_covariance).min() > 0


def test_agreement_with_gaussian_likelihood():
    rng = np.random.default_rng(3)
    means = rng.uniform(-2, 2, size=(8, 5))
    X, y = clouds(rng, means, n=40)
    model = train_lda(X, y)
    T, _ = clouds(rng, means, n=50)
    ll = np.column_stack([
        multivariate_normal(model.class_means[c], model.pooled_covariance).logpdf(T) + math.log(model.priors[c])
        for c in range(8)])
    assert np.mean(model.predict(T) == ll.argmax(axis=1)) >= 0.99


def test_class_mean_is_classified_as_its_class():
    rng = np.random.default_rng(4)
    means = np.array([[0, 0], [10, 0], [0, 10]], float)
    X, y = clouds(rng, means, n=30)
    assert list(train_lda(X, y).predict(means)) == [0, 1, 2]


def test_identical_classes_fall_back_to_priors():
    X = np.ones((7, 3))
    assert set(train_lda(X, np.array([0, 0, 0, 0, 1, 1, 1])).predict(X)) == {0}
    assert set(train_lda(X, np.array([0, 0, 0, 1, 1, 1, 1])).predict(X)) == {1}
    assert set(train_lda(X[:6], np.array([0, 0, 0, 1, 1, 1])).predict(X)) == {0}


def test_constant_shift_of_discriminants_keeps_argmax():
    rng = np.random.default_rng(5)
    X, y = clouds(rng, [[0, 0], [2, 0], [0, 2]], n=20)
    d = train_lda(X, y).discriminants(X)
    assert np.array_equal(d.argmax(1), (d + 123.4).argmax(1))


def test_row_order_does_not_matter():
    rng = np.random.default_rng(6)
    X, y = clouds(rng, [[0, 0], [2, 0], [0, 2]], n=20)
    perm = rng.permutation(len(y))
    a, b = train_lda(X, y), train_lda(X[perm], y[perm])
    T = rng.normal(size=(50, 2))
    assert np.array_equal(a.predict(T), b.predict(T))


def test_errors():
    with pytest.raises(ParameterError):
        train_lda(np.zeros((3, 2)), np.array([0, 0, 1]))
    with pytest.raises(ParameterError):
        train_lda(np.zeros((4, 2)), np.array([0, 0, 1, 1]), shrinkage=-1)
    model = train_lda(np.arange(8.0).reshape(4, 2), np.array([0, 0, 1, 1]))
    with pytest.raises(ValueError, match="2 columns"):
        model.predict(np.zeros((1, 3)))
