"""Three from-scratch binary classifiers behind one train/predict contract.

Attack is always the positive class (label 1). Every trainer canonicalizes
sample order and carries its own z-score normalization fitted on training
data only, so predictions are invariant to input ordering and raw feature
scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np
from numba import njit


class ClassifierKind(IntEnum):
    SVM = 0
    RF = 1
    SOM = 2


@dataclass
class Hyperparams:
    svm_epochs: int = 100
    svm_batch_size: int = 32
    svm_lambda: float = 1e-3
    svm_eta0: float = 0.5
    rf_trees: int = 25
    rf_max_depth: int = 8
    rf_min_split: int = 2
    som_grid: tuple[int, int] = (8, 8)
    som_epochs: int = 200
    som_eta0: float = 0.5
    som_eta_end: float = 0.01
    som_sigma_end: float = 0.5


@dataclass
class TrainedModel:
    kind: ClassifierKind
    mean: np.ndarray
    std: np.ndarray
    params: object

    @property
    def n_features(self) -> int:
        return int(self.mean.shape[0])


def _canonicalize(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort(np.vstack([y[None, :], X.T[::-1]]))
    return X[order], y[order]


def _fit_norm(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0.0] = 1.0  # constant feature maps to 0 after z-scoring
    return mean, std


# ---------------------------------------------------------------- linear SVM

@dataclass
class SvmParams:
    w: np.ndarray
    b: float


def _train_svm(X: np.ndarray, y01: np.ndarray, rng: np.random.Generator, hp: Hyperparams) -> SvmParams:
    n, d = X.shape
    y = np.where(y01 == 1, 1.0, -1.0)
    w = np.zeros(d)
    b = 0.0
    lam = hp.svm_lambda
    t = 0
    for _ in range(hp.svm_epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.svm_batch_size):
            idx = order[start : start + hp.svm_batch_size]
            t += 1
            eta = hp.svm_eta0 / (1.0 + hp.svm_eta0 * lam * t)
            Xb, yb = X[idx], y[idx]
            viol = yb * (Xb @ w + b) < 1.0
            # subgradient of (lam/2)|w|^2 + mean hinge over the batch
            w *= 1.0 - eta * lam
            if viol.any():
                w += eta * (yb[viol, None] * Xb[viol]).sum(axis=0) / len(idx)
                b += eta * yb[viol].sum() / len(idx)
    return SvmParams(w=w, b=b)


# -------------------------------------------------------------- random forest

@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    label: int = 0
    is_leaf: bool = False


def _majority(y: np.ndarray) -> int:
    ones = int(y.sum())
    return 1 if 2 * ones >= len(y) else 0  # tie goes to Attack


def _best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray) -> tuple[int, float, float]:
    """Lowest weighted Gini over candidate thresholds of the given features."""
    n = len(y)
    best_feat, best_thr, best_gini = -1, 0.0, math.inf
    for f in feats:
        xs = X[:, f]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        ys_s = y[order]
        boundary = np.nonzero(xs_s[:-1] != xs_s[1:])[0]
        if boundary.size == 0:
            continue
        pos = np.cumsum(ys_s)
        total_pos = pos[-1]
        nl = boundary + 1
        nr = n - nl
        pl = pos[boundary]
        pr = total_pos - pl
        gini_l = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
        gini_r = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
        weighted = (nl * gini_l + nr * gini_r) / n
        j = int(np.argmin(weighted))
        if weighted[j] < best_gini:
            best_gini = float(weighted[j])
            best_feat = int(f)
            best_thr = float((xs_s[boundary[j]] + xs_s[boundary[j] + 1]) / 2.0)
    return best_feat, best_thr, best_gini


def _grow_tree(X: np.ndarray, y: np.ndarray, depth: int, rng: np.random.Generator, hp: Hyperparams, n_sub: int) -> TreeNode:
    if depth >= hp.rf_max_depth or len(y) < hp.rf_min_split or y.min() == y.max():
        return TreeNode(label=_majority(y), is_leaf=True)
    feats = rng.choice(X.shape[1], size=n_sub, replace=False)
    feat, thr, gini = _best_split(X, y, np.sort(feats))
    if feat < 0:
        return TreeNode(label=_majority(y), is_leaf=True)
    mask = X[:, feat] <= thr
    left = _grow_tree(X[mask], y[mask], depth + 1, rng, hp, n_sub)
    right = _grow_tree(X[~mask], y[~mask], depth + 1, rng, hp, n_sub)
    return TreeNode(feature=feat, threshold=thr, left=left, right=right)


def _tree_predict(node: TreeNode, X: np.ndarray, out: np.ndarray, idx: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.label
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_predict(node.left, X, out, idx[mask])
    _tree_predict(node.right, X, out, idx[~mask])


@dataclass
class ForestParams:
    trees: list[TreeNode]


def _train_forest(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, hp: Hyperparams) -> ForestParams:
    n, d = X.shape
    n_sub = max(1, int(round(math.sqrt(d))))
    trees = []
    for _ in range(hp.rf_trees):
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], 0, rng, hp, n_sub))
    return ForestParams(trees=trees)


def _forest_votes(params: ForestParams, X: np.ndarray) -> np.ndarray:
    votes = np.zeros(len(X), dtype=int)
    idx = np.arange(len(X))
    out = np.empty(len(X), dtype=int)
    for tree in params.trees:
        _tree_predict(tree, X, out, idx)
        votes += out
    return votes


# ------------------------------------------------------- self-organizing map

@njit(cache=True)
def _som_fit(W, X, order, sigmas, etas, coords):  # pragma: no cover - numba
    units, d = W.shape
    for t in range(order.shape[0]):
        xi = order[t]
        best = 0
        best_d = 1e300
        for u in range(units):
            acc = 0.0
            for j in range(d):
                diff = W[u, j] - X[xi, j]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = u
        by = coords[best, 0]
        bx = coords[best, 1]
        denom = 2.0 * sigmas[t] * sigmas[t]
        for u in range(units):
            gy = coords[u, 0] - by
            gx = coords[u, 1] - bx
            h = math.exp(-(gy * gy + gx * gx) / denom)
            if h < 1e-6:
                continue
            step = etas[t] * h
            for j in range(d):
                W[u, j] += step * (X[xi, j] - W[u, j])


@dataclass
class SomParams:
    weights: np.ndarray  # (units, d) codebook
    labels: np.ndarray  # (units,) per-unit class
    grid: tuple[int, int]


def _grid_coords(grid: tuple[int, int]) -> np.ndarray:
    gh, gw = grid
    return np.array([(i // gw, i % gw) for i in range(gh * gw)], dtype=np.float64)


def _bmu(weights: np.ndarray, X: np.ndarray) -> np.ndarray:
    d2 = ((X[:, None, :] - weights[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)  # argmin takes the lowest index on ties


def _train_som(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, hp: Hyperparams) -> SomParams:
    gh, gw = hp.som_grid
    units = gh * gw
    d = X.shape[1]
    W = rng.standard_normal((units, d)) * 0.5
    coords = _grid_coords(hp.som_grid)
    iters = hp.som_epochs * len(X)
    order = np.concatenate([rng.permutation(len(X)) for _ in range(hp.som_epochs)]).astype(np.int64)
    frac = np.arange(iters) / max(iters - 1, 1)
    sigma0 = max(gh, gw) / 2.0
    sigmas = sigma0 * (hp.som_sigma_end / sigma0) ** frac
    etas = hp.som_eta0 * (hp.som_eta_end / hp.som_eta0) ** frac
    _som_fit(W, np.ascontiguousarray(X), order, sigmas, etas, coords)

    # supervised labeling pass: majority label per mapped unit, nearest mapped
    # unit (grid distance, lowest index on ties) for the rest
    bmus = _bmu(W, X)
    labels = np.full(units, -1, dtype=int)
    for u in range(units):
        hits = y[bmus == u]
        if len(hits):
            labels[u] = _majority(hits)
    mapped = np.nonzero(labels >= 0)[0]
    for u in range(units):
        if labels[u] < 0:
            gd = ((coords[mapped] - coords[u]) ** 2).sum(axis=1)
            labels[u] = labels[mapped[int(np.argmin(gd))]]
    return SomParams(weights=W, labels=labels, grid=hp.som_grid)


# ---------------------------------------------------------------- public API

def train(
    kind: ClassifierKind,
    X: np.ndarray,
    y: np.ndarray,
    seed: int = 0,
    hp: Optional[Hyperparams] = None,
) -> TrainedModel:
    """Fit one classifier on reduced feature vectors; deterministic under seed."""
    hp = hp or Hyperparams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with matching labels")
    if kind in (ClassifierKind.SVM, ClassifierKind.RF):
        for cls in (0, 1):
            if (y == cls).sum() < 2:
                raise ValueError(f"{kind.name} training needs >= 2 samples per class")
    elif len(y) < 1:
        raise ValueError("SOM labeling needs at least 1 sample")

    X, y = _canonicalize(X, y)
    mean, std = _fit_norm(X)
    Xn = (X - mean) / std
    rng = np.random.default_rng(seed)
    if kind == ClassifierKind.SVM:
        params = _train_svm(Xn, y, rng, hp)
    elif kind == ClassifierKind.RF:
        params = _train_forest(Xn, y, rng, hp)
    else:
        params = _train_som(Xn, y, rng, hp)
    return TrainedModel(kind=kind, mean=mean, std=std, params=params)


def predict(model: TrainedModel, x: np.ndarray) -> int:
    """Classify one reduced vector: 1 = Attack, 0 = Normal."""
    return int(predict_batch(model, np.asarray(x, dtype=float)[None, :])[0])


def predict_batch(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected (n, {model.n_features}) input, got {X.shape}")
    Xn = (X - model.mean) / model.std
    if model.kind == ClassifierKind.SVM:
        p: SvmParams = model.params
        return (Xn @ p.w + p.b >= 0.0).astype(int)
    if model.kind == ClassifierKind.RF:
        f: ForestParams = model.params
        votes = _forest_votes(f, Xn)
        return (2 * votes >= len(f.trees)).astype(int)  # tie -> Attack
    s: SomParams = model.params
    return s.labels[_bmu(s.weights, Xn)].astype(int)


# ------------------------------------------------------------- serialization

MODEL_SCHEMA_VERSION = 1


def _tree_to_doc(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"label": node.label}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_doc(node.left),
        "right": _tree_to_doc(node.right),
    }


def _tree_from_doc(doc: dict) -> TreeNode:
    if "label" in doc:
        return TreeNode(label=int(doc["label"]), is_leaf=True)
    return TreeNode(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        left=_tree_from_doc(doc["left"]),
        right=_tree_from_doc(doc["right"]),
    )


def model_to_doc(model: TrainedModel, mask: Optional[int] = None) -> dict:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind.name,
        "mean": model.mean.tolist(),
        "std": model.std.tolist(),
    }
    if mask is not None:
        doc["feature_mask"] = mask
    if model.kind == ClassifierKind.SVM:
        doc["svm"] = {"w": model.params.w.tolist(), "b": model.params.b}
    elif model.kind == ClassifierKind.RF:
        doc["forest"] = [_tree_to_doc(t) for t in model.params.trees]
    else:
        doc["som"] = {
            "grid": list(model.params.grid),
            "weights": model.params.weights.tolist(),
            "labels": model.params.labels.tolist(),
        }
    return doc


def model_from_doc(doc: dict) -> tuple[TrainedModel, Optional[int]]:
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {doc.get('schema_version')}")
    kind = ClassifierKind[doc["kind"]]
    mean = np.array(doc["mean"], dtype=float)
    std = np.array(doc["std"], dtype=float)
    if kind == ClassifierKind.SVM:
        params = SvmParams(w=np.array(doc["svm"]["w"], dtype=float), b=float(doc["svm"]["b"]))
    elif kind == ClassifierKind.RF:
        params = ForestParams(trees=[_tree_from_doc(t) for t in doc["forest"]])
    else:
        som = doc["som"]
        params = SomParams(
            weights=np.array(som["weights"], dtype=float),
            labels=np.array(som["labels"], dtype=int),
            grid=tuple(som["grid"]),
        )
    model = TrainedModel(kind=kind, mean=mean, std=std, params=params)
    return model, doc.get("feature_mask")
