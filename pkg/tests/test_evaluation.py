import numpy as np
import pytest

from qmind.classifiers import ClassifierKind, Hyperparams
from qmind.evaluation import (
    ConfusionMatrix,
    DetectionMetrics,
    ZERO_METRICS,
    confusion,
    cross_validate,
    mean_metrics,
    metrics,
    stratified_folds,
)

FAST = Hyperparams(svm_epochs=30, rf_trees=10, som_epochs=40)


def test_confusion_counts():
    y_true = np.array([1, 1, 1, 0, 0, 0, 1, 0])
    y_pred = np.array([1, 0, 1, 0, 1, 0, 1, 1])
    cm = confusion(y_true, y_pred)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (3, 2, 2, 1)
    assert cm.total == 8


def test_metrics_hand_computed():
    m = metrics(ConfusionMatrix(tp=90, tn=80, fp=20, fn=10))
    assert m.precision == pytest.approx(90 / 110)
    assert m.recall == pytest.approx(0.9)
    assert m.f_score == pytest.approx(2 * (90 / 110) * 0.9 / (90 / 110 + 0.9))
    assert m.accuracy == pytest.approx(0.85)
    assert m.false_alarm == pytest.approx(0.2)


def test_metrics_zero_denominators():
    # all-negative predictions on all-negative truth: no division blows up
    m = metrics(ConfusionMatrix(tp=0, tn=5, fp=0, fn=0))
    assert m == DetectionMetrics(0.0, 0.0, 0.0, 1.0, 0.0)
    m = metrics(ConfusionMatrix(tp=0, tn=0, fp=0, fn=5))
    assert m.as_tuple() == (0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        metrics(ConfusionMatrix(0, 0, 0, 0))
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


def test_mean_metrics():
    a = DetectionMetrics(1.0, 0.0, 0.5, 1.0, 0.2)
    b = DetectionMetrics(0.0, 1.0, 0.5, 0.0, 0.4)
    assert mean_metrics([a, b]).as_tuple() == pytest.approx((0.5, 0.5, 0.5, 0.5, 0.3))
    assert mean_metrics([ZERO_METRICS]) == ZERO_METRICS


def test_stratified_folds_preserve_class_balance():
    y = np.array([0] * 40 + [1] * 20)
    folds = stratified_folds(y, k=5, seed=3)
    assert sorted(np.concatenate(folds).tolist()) == list(range(60))
    for f in folds:
        assert (y[f] == 0).sum() == 8
        assert (y[f] == 1).sum() == 4
    assert [f.tolist() for f in stratified_folds(y, 5, 3)] == [f.tolist() for f in folds]
    assert [f.tolist() for f in stratified_folds(y, 5, 4)] != [f.tolist() for f in folds]
    with pytest.raises(ValueError):
        stratified_folds(y, k=1)


def test_cross_validate_on_separable_data():
    rng = np.random.default_rng(0)
    X = np.zeros((80, 10))
    y = np.array([0] * 40 + [1] * 40)
    X[:40, :2] = rng.normal(0.0, 0.5, size=(40, 2))
    X[40:, :2] = rng.normal(5.0, 0.5, size=(40, 2))
    m = cross_validate(ClassifierKind.RF, 0b11, X, y, k=4, seed=1, hp=FAST)
    assert m.accuracy == 1.0 and m.false_alarm == 0.0


def test_cross_validate_deterministic(desk_dataset):
    _, X, y = desk_dataset
    mask = (1 << 0) | (1 << 1) | (1 << 5)
    a = cross_validate(ClassifierKind.SVM, mask, X, y, k=5, seed=9, hp=FAST)
    b = cross_validate(ClassifierKind.SVM, mask, X, y, k=5, seed=9, hp=FAST)
    assert a == b


def test_cross_validate_requires_both_classes():
    X = np.zeros((10, 10))
    with pytest.raises(ValueError):
        cross_validate(ClassifierKind.RF, 0b11, X, np.zeros(10, dtype=int))
