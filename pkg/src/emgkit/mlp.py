"""Feed-forward network (tanh hidden layers, softmax output) trained by backpropagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple[int, ...] = (32,)
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or not 0 <= self.momentum < 1:
            raise ParameterError("need learning_rate > 0 and 0 <= momentum < 1")
        if self.epochs < 0 or self.batch_size < 1 or any(h < 1 for h in self.hidden):
            raise ParameterError("epochs >= 0, batch_size >= 1 and hidden sizes >= 1 required")

    def to_dict(self):
        return {"hidden": list(self.hidden), "learning_rate": self.learning_rate,
                "momentum": self.momentum, "epochs": self.epochs,
                "batch_size": self.batch_size, "seed": self.seed}


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]   # weights[l] has shape (fan_in, fan_out)
    biases: list[np.ndarray]
    config: MlpConfig
    loss_trace: list[float] = field(default_factory=list)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.layer_sizes[0]:
            raise ValueError(f"expected {self.layer_sizes[0]} input columns, got {X.shape[1]}")
        return _forward(self.weights, self.biases, X)[-1]

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        p = self.predict_proba(X)
        return np.argmax(p, axis=1), p


def init_params(layer_sizes, seed: int):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return ws, bs


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(ws, bs, X):
    acts = [X]
    for l, (W, b) in enumerate(zip(ws, bs)):
        z = acts[-1] @ W + b
        acts.append(softmax(z) if l == len(ws) - 1 else np.tanh(z))
    return acts


def loss_and_grads(ws, bs, X, Y):
    """Mean cross-entropy over the batch and its gradients; ``Y`` is one-hot."""
    acts = _forward(ws, bs, X)
    p = acts[-1]
    n = X.shape[0]
    loss = -float(np.sum(Y * np.log(np.clip(p, 1e-300, None)))) / n
    delta = (p - Y) / n
    gws, gbs = [None] * len(ws), [None] * len(ws)
    for l in range(len(ws) - 1, -1, -1):
        gws[l] = acts[l].T @ delta
        gbs[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ ws[l].T) * (1 - acts[l] ** 2)
    return loss, gws, gbs


def train_mlp(X, y, n_outputs: int = 8, cfg: MlpConfig = MlpConfig()) -> MlpModel:
    """Mini-batch gradient descent with momentum on cross-entropy.

    ``loss_trace`` records the full training-set loss after every epoch.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise ParameterError("X must be 2-D with one label per row")
    if y.min() < 0 or y.max() >= n_outputs:
        raise ParameterError(f"labels must lie in 0..{n_outputs - 1}")
    sizes = (X.shape[1],) + tuple(cfg.hidden) + (n_outputs,)
    ws, bs = init_params(sizes, cfg.seed)
    Y = np.eye(n_outputs)[y]
    vw = [np.zeros_like(w) for w in ws]
    vb = [np.zeros_like(b) for b in bs]
    rng = np.random.default_rng([cfg.seed, 1])
    trace = []
    n = len(X)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, gws, gbs = loss_and_grads(ws, bs, X[idx], Y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}; lower the learning rate "
                    f"(currently {cfg.learning_rate})")
            for l in range(len(ws)):
                vw[l] = cfg.momentum * vw[l] - cfg.learning_rate * gws[l]
                vb[l] = cfg.momentum * vb[l] - cfg.learning_rate * gbs[l]
                ws[l] += vw[l]
                bs[l] += vb[l]
        full = loss_and_grads(ws, bs, X, Y)[0]
        if not np.isfinite(full) or not all(np.all(np.isfinite(w)) for w in ws):
            raise DivergenceError(
                f"non-finite parameters after epoch {epoch}; lower the learning rate")
        trace.append(full)
    return MlpModel(sizes, ws, bs, cfg, trace)
