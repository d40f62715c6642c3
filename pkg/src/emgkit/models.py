"""Trainable classifiers behind one interface, plus model-file persistence.

A model file is versioned JSON holding the model kind, its hyperparameters,
every fitted parameter, the min-max normalisation and the selected feature
names, so inference needs nothing but the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import N_CLASSES, FeatureMatrix, atomic_write_text
from .errors import FormatError, ParameterError
from .lda import LdaModel, train_lda
from .mlp import MlpConfig, MlpModel, train_mlp
from .preprocess import NormalizationParams, fit_minmax, scale_values
from .selection import select_by_name
from .svm import Kernel, SvmDualSolution, SvmMulticlassModel, rbf_gamma, train_ovo

MODEL_FORMAT_VERSION = 1
MODEL_KINDS = ("bpnn", "lda", "svm")


@dataclass
class TrainedModel:
    kind: str
    hyperparameters: dict
    normalization: NormalizationParams
    estimator: Any
    extra: dict = field(default_factory=dict)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.normalization.feature_names

    def _inputs(self, m: FeatureMatrix) -> np.ndarray:
        if m.feature_names != self.feature_names:
            m = select_by_name(m, self.feature_names)
        return scale_values(self.normalization, m.values)

    def predict(self, m: FeatureMatrix) -> np.ndarray:
        """Predicted class indices (0 = A1)."""
        X = self._inputs(m)
        if self.kind == "bpnn":
            return self.estimator.predict(X)[0]
        return np.asarray(self.estimator.predict(X), dtype=int)

    def predict_vector(self, features: dict) -> int:
        """Class index for one named feature vector (extra names are ignored)."""
        missing = [n for n in self.feature_names if n not in features]
        if missing:
            raise ValueError(f"feature(s) missing: {', '.join(missing)}")
        row = np.array([[features[n] for n in self.feature_names]])
        X = scale_values(self.normalization, row)
        if self.kind == "bpnn":
            return int(self.estimator.predict(X)[0][0])
        return int(self.estimator.predict(X)[0])

    def predict_proba(self, m: FeatureMatrix) -> np.ndarray | None:
        if self.kind != "bpnn":
            return None
        return self.estimator.predict_proba(self._inputs(m))

    def save(self, path) -> None:
        atomic_write_text(path, dumps_model(self))


def train_model(kind: str, train: FeatureMatrix, hyper: dict | None = None,
                threads: int = 1) -> TrainedModel:
    """Fit the normalisation on ``train`` and train a ``bpnn``, ``lda`` or ``svm`` model."""
    hyper = dict(hyper or {})
    norm = fit_minmax(train)
    X = scale_values(norm, train.values)
    y = train.label_indices
    if kind == "bpnn":
        cfg = MlpConfig(
            hidden=tuple(int(h) for h in hyper.get("hidden", (32,))),
            learning_rate=float(hyper.get("learning_rate", 0.05)),
            momentum=float(hyper.get("momentum", 0.9)),
            epochs=int(hyper.get("epochs", 500)),
            batch_size=int(hyper.get("batch_size", 16)),
            seed=int(hyper.get("seed", 0)))
        est = train_mlp(X, y, N_CLASSES, cfg)
        hyper = cfg.to_dict()
    elif kind == "lda":
        shrink = float(hyper.get("shrinkage", 1e-3))
        est = train_lda(X, y, shrink)
        hyper = {"shrinkage": shrink}
    elif kind == "svm":
        C = float(hyper.get("C", 10.0))
        kname = hyper.get("kernel", "rbf")
        gamma = hyper.get("gamma")
        gamma = rbf_gamma(X) if gamma in (None, "auto") else float(gamma)
        kernel = Kernel(kname, gamma)
        tol = float(hyper.get("tol", 1e-6))
        est = train_ovo(X, y, C, kernel, tol, int(hyper.get("max_iter", 100_000)), threads)
        est = SvmMulticlassModel(est.classes, est.pairs, tuple(m.compact() for m in est.machines))
        hyper = {"C": C, "kernel": kname, "gamma": gamma, "tol": tol}
    else:
        raise ParameterError(f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    return TrainedModel(kind, hyper, norm, est)


# -- serialisation -----------------------------------------------------------------

def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _estimator_to_dict(kind, est) -> dict:
    if kind == "bpnn":
        return {"layer_sizes": list(est.layer_sizes),
                "weights": [_arr(w) for w in est.weights],
                "biases": [_arr(b) for b in est.biases],
                "loss_trace": [float(v) for v in est.loss_trace]}
    if kind == "lda":
        return {"classes": list(est.classes), "class_means": _arr(est.class_means),
                "pooled_covariance": _arr(est.pooled_covariance), "priors": _arr(est.priors)}
    return {"classes": list(est.classes), "pairs": [list(p) for p in est.pairs],
            "machines": [{"support_vectors": _arr(m.X), "alphas": _arr(m.alphas),
                          "y": _arr(m.y), "bias": float(m.bias),
                          "kkt_residual": float(m.kkt_residual), "iterations": m.iterations}
                         for m in est.machines]}


def _estimator_from_dict(kind, hyper, d):
    if kind == "bpnn":
        cfg = MlpConfig(hidden=tuple(hyper["hidden"]), learning_rate=hyper["learning_rate"],
                        momentum=hyper["momentum"], epochs=hyper["epochs"],
                        batch_size=hyper["batch_size"], seed=hyper["seed"])
        return MlpModel(tuple(d["layer_sizes"]), [np.array(w) for w in d["weights"]],
                        [np.array(b) for b in d["biases"]], cfg, list(d["loss_trace"]))
    if kind == "lda":
        return LdaModel(tuple(d["classes"]), np.array(d["class_means"]),
                        np.array(d["pooled_covariance"]), np.array(d["priors"]), hyper["shrinkage"])
    kernel = Kernel(hyper["kernel"], hyper["gamma"])
    machines = tuple(
        SvmDualSolution(np.array(m["alphas"]), m["bias"], np.array(m["y"]),
                        np.array(m["support_vectors"]).reshape(len(m["alphas"]), -1),
                        kernel, hyper["C"], m["kkt_residual"], m["iterations"])
        for m in d["machines"])
    return SvmMulticlassModel(tuple(d["classes"]), tuple(tuple(p) for p in d["pairs"]), machines)


def dumps_model(model: TrainedModel) -> str:
    doc = {"format": "emgkit-model", "version": MODEL_FORMAT_VERSION, "kind": model.kind,
           "hyperparameters": model.hyperparameters,
           "normalization": model.normalization.to_dict(),
           "selected_features": list(model.feature_names),
           "parameters": _estimator_to_dict(model.kind, model.estimator),
           "extra": model.extra}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_model(path) -> TrainedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a model file ({exc})") from None
    if doc.get("format") != "emgkit-model":
        raise FormatError(f"{path}: not an emgkit model file")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported model version {doc.get('version')}")
    kind = doc["kind"]
    if kind not in MODEL_KINDS:
        raise FormatError(f"{path}: unknown model kind {kind!r}")
    norm = NormalizationParams.from_dict(doc["normalization"])
    est = _estimator_from_dict(kind, doc["hyperparameters"], doc["parameters"])
    return TrainedModel(kind, doc["hyperparameters"], norm, est, doc.get("extra", {}))
