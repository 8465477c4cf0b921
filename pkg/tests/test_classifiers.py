import json

import numpy as np
import pytest

from qmind.classifiers import (
    ClassifierKind,
    Hyperparams,
    model_from_doc,
    model_to_doc,
    predict,
    predict_batch,
    train,
)

FAST = Hyperparams(svm_epochs=30, rf_trees=10, som_epochs=40)


def blobs(n=60, seed=0, gap=4.0):
    """Linearly separable two-class cloud."""
    rng = np.random.default_rng(seed)
    X0 = rng.normal(0.0, 0.6, size=(n, 3))
    X1 = rng.normal(gap, 0.6, size=(n, 3))
    X = np.vstack([X0, X1])
    y = np.array([0] * n + [1] * n)
    return X, y


def xor(n=50, seed=1):
    rng = np.random.default_rng(seed)
    centers = [((0, 0), 0), ((3, 3), 0), ((0, 3), 1), ((3, 0), 1)]
    X, y = [], []
    for (cx, cy), lab in centers:
        X.append(rng.normal((cx, cy), 0.35, size=(n, 2)))
        y.extend([lab] * n)
    return np.vstack(X), np.array(y)


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_separable_blobs(kind):
    X, y = blobs()
    model = train(kind, X, y, seed=3, hp=FAST)
    assert (predict_batch(model, X) == y).all()


def test_rf_and_som_solve_xor():
    X, y = xor()
    for kind in (ClassifierKind.RF, ClassifierKind.SOM):
        model = train(kind, X, y, seed=5, hp=FAST)
        acc = (predict_batch(model, X) == y).mean()
        assert acc >= 0.95, f"{kind.name} xor accuracy {acc}"


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_deterministic_under_seed(kind):
    X, y = blobs(seed=7)
    a = train(kind, X, y, seed=11, hp=FAST)
    b = train(kind, X, y, seed=11, hp=FAST)
    probe = np.random.default_rng(0).normal(2.0, 2.0, size=(50, 3))
    np.testing.assert_array_equal(predict_batch(a, probe), predict_batch(b, probe))


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_prediction_invariant_to_sample_order(kind):
    X, y = blobs(seed=9)
    perm = np.random.default_rng(2).permutation(len(y))
    a = train(kind, X, y, seed=4, hp=FAST)
    b = train(kind, X[perm], y[perm], seed=4, hp=FAST)
    probe = np.random.default_rng(1).normal(2.0, 2.0, size=(50, 3))
    np.testing.assert_array_equal(predict_batch(a, probe), predict_batch(b, probe))


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_scale_invariance(kind):
    # z-scoring inside the model makes raw feature scale irrelevant
    X, y = blobs(seed=13)
    scale = np.array([1.0, 1e4, 1e-3])
    a = train(kind, X, y, seed=6, hp=FAST)
    b = train(kind, X * scale, y, seed=6, hp=FAST)
    probe = np.random.default_rng(3).normal(2.0, 2.0, size=(50, 3))
    np.testing.assert_array_equal(predict_batch(a, probe), predict_batch(b, probe * scale))


def test_constant_feature_is_harmless():
    X, y = blobs(seed=15)
    X[:, 1] = 42.0
    for kind in ClassifierKind:
        model = train(kind, X, y, seed=8, hp=FAST)
        assert (predict_batch(model, X) == y).mean() >= 0.95


def test_training_validation():
    X = np.zeros((4, 2))
    with pytest.raises(ValueError):
        train(ClassifierKind.SVM, X, np.array([0, 0, 0, 1]), hp=FAST)
    with pytest.raises(ValueError):
        train(ClassifierKind.RF, X[:2], np.array([0, 1]), hp=FAST)
    with pytest.raises(ValueError):
        train(ClassifierKind.SVM, X.ravel(), np.array([0, 0, 1, 1] * 2), hp=FAST)


def test_predict_shape_checks():
    X, y = blobs()
    model = train(ClassifierKind.SVM, X, y, hp=FAST)
    with pytest.raises(ValueError):
        predict_batch(model, np.zeros((2, 5)))
    assert predict(model, np.array([4.0, 4.0, 4.0])) == 1
    assert predict(model, np.array([0.0, 0.0, 0.0])) == 0


@pytest.mark.parametrize("kind", list(ClassifierKind))
def test_json_round_trip(kind):
    X, y = blobs(seed=21)
    model = train(kind, X, y, seed=2, hp=FAST)
    doc = json.loads(json.dumps(model_to_doc(model, mask=0b110)))
    restored, mask = model_from_doc(doc)
    assert mask == 0b110
    probe = np.random.default_rng(4).normal(2.0, 2.0, size=(50, 3))
    np.testing.assert_array_equal(predict_batch(model, probe), predict_batch(restored, probe))


def test_doc_version_check():
    with pytest.raises(ValueError):
        model_from_doc({"schema_version": 99})
