import json

import numpy as np
import pytest

from emgkit.core import ALL_LABELS, FeatureMatrix
from emgkit.errors import FormatError, ParameterError
from emgkit.models import dumps_model, load_model, train_model


def dataset(seed=0, per_class=10, n_feat=6):
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0, 5, size=(8, n_feat))
    y = np.repeat(np.arange(8), per_class)
    values = centres[y] + 0.3 * rng.normal(size=(len(y), n_feat))
    names = tuple(f"ch1_F{i}" for i in range(n_feat))
    return FeatureMatrix(names, values, tuple(ALL_LABELS[i] for i in y))


HYPER = {"bpnn": {"hidden": [8], "epochs": 40, "seed": 3}, "lda": {}, "svm": {"C": 10.0}}


@pytest.mark.parametrize("kind", ["bpnn", "lda", "svm"])
def test_round_trip_gives_identical_predictions(kind, tmp_path):
    train, test = dataset(0), dataset(1)
    model = train_model(kind, train, HYPER[kind])
    path = tmp_path / "m.json"
    model.save(path)
    loaded = load_model(path)
    assert loaded.kind == kind and loaded.feature_names == train.feature_names
    assert np.array_equal(model.predict(test), loaded.predict(test))
    assert dumps_model(loaded) == path.read_text()


@pytest.mark.parametrize("kind", ["bpnn", "lda", "svm"])
def test_models_learn_separable_data(kind):
    model = train_model(kind, dataset(0), HYPER[kind] | ({"epochs": 300} if kind == "bpnn" else {}))
    test = dataset(0, per_class=5)
    assert np.mean(model.predict(test) == test.label_indices) >= 0.9


def test_predict_selects_columns_by_name():
    train = dataset(0)
    model = train_model("lda", train)
    shuffled = FeatureMatrix(train.feature_names[::-1], train.values[:, ::-1], train.labels)
    assert np.array_equal(model.predict(train), model.predict(shuffled))
    vec = dict(zip(train.feature_names, train.values[0])) | {"other": 1.0}
    assert model.predict_vector(vec) == model.predict(train)[0]
    with pytest.raises(ValueError, match="missing"):
        model.predict_vector({"ch1_F0": 1.0})


def test_training_is_deterministic():
    a = dumps_model(train_model("bpnn", dataset(0), HYPER["bpnn"]))
    b = dumps_model(train_model("bpnn", dataset(0), HYPER["bpnn"]))
    assert a == b


def test_svm_gamma_auto_is_recorded():
    model = train_model("svm", dataset(0), {"gamma": "auto"})
    assert model.hyperparameters["gamma"] > 0


def test_bad_files_and_kinds(tmp_path):
    with pytest.raises(ParameterError, match="bpnn"):
        train_model("cnn", dataset(0))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError):
        load_model(bad)
    doc = json.loads(dumps_model(train_model("lda", dataset(0))))
    doc["version"] = 99
    bad.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="version"):
        load_model(bad)
