"""Confusion matrices, detection metrics and stratified cross-validation.

The five metrics double as the learning agent's state vector; every 0/0
denominator evaluates to 0 so state components are always finite.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifiers import ClassifierKind, Hyperparams, predict_batch, train
from .features import project


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class DetectionMetrics:
    precision: float
    recall: float
    f_score: float
    accuracy: float
    false_alarm: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.precision, self.recall, self.f_score, self.accuracy, self.false_alarm)


ZERO_METRICS = DetectionMetrics(0.0, 0.0, 0.0, 0.0, 0.0)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    return ConfusionMatrix(
        tp=int(((y_true == 1) & (y_pred == 1)).sum()),
        tn=int(((y_true == 0) & (y_pred == 0)).sum()),
        fp=int(((y_true == 0) & (y_pred == 1)).sum()),
        fn=int(((y_true == 1) & (y_pred == 0)).sum()),
    )


def metrics(cm: ConfusionMatrix) -> DetectionMetrics:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f_score = 2.0 / (1.0 / precision + 1.0 / recall) if precision > 0 and recall > 0 else 0.0
    accuracy = (cm.tp + cm.tn) / cm.total
    false_alarm = _ratio(cm.fp, cm.fp + cm.tn)
    return DetectionMetrics(precision, recall, f_score, accuracy, false_alarm)


def mean_metrics(parts: list[DetectionMetrics]) -> DetectionMetrics:
    arr = np.array([m.as_tuple() for m in parts], dtype=float).mean(axis=0)
    return DetectionMetrics(*[float(v) for v in arr])


def stratified_folds(y: np.ndarray, k: int, seed: int = 0) -> list[np.ndarray]:
    """k index arrays with per-class proportions preserved; seeded shuffle."""
    if k < 2:
        raise ValueError("k must be >= 2")
    y = np.asarray(y, dtype=int)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


def cross_validate(
    kind: ClassifierKind,
    mask: int,
    X: np.ndarray,
    y: np.ndarray,
    k: int = 5,
    seed: int = 0,
    hp: Optional[Hyperparams] = None,
    train_seed: Optional[int] = None,
) -> DetectionMetrics:
    """Stratified k-fold metrics for one (feature mask, classifier) action.

    `seed` drives the fold split; `train_seed` (defaults to `seed`) drives the
    classifier's own randomness, so the two streams stay independent.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    if not (0 in classes and 1 in classes):
        raise ValueError("cross-validation needs both classes present")
    Xr = project(X, mask)
    folds = stratified_folds(y, k, seed)
    fit_seed = seed if train_seed is None else train_seed
    per_fold: list[DetectionMetrics] = []
    for test_idx in folds:
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        model = train(kind, Xr[train_mask], y[train_mask], seed=fit_seed, hp=hp)
        preds = predict_batch(model, Xr[test_idx])
        per_fold.append(metrics(confusion(y[test_idx], preds)))
    return mean_metrics(per_fold)
