"""Deterministic multinomial logistic regression.

The learner is the utility backend for data-value games: train on a
(weighted) multiset of labeled examples, score by held-out accuracy.
Everything here is deliberately dependency-free full-batch numpy so that
identical inputs give bit-identical parameters on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STD_FLOOR = 1e-8


@dataclass
class LabeledDataset:
    """Feature matrix, integer class labels, optional per-example weights."""

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"feature rows ({self.features.shape[0]}) != labels ({self.labels.shape[0]})"
            )
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape[0] != self.labels.shape[0]:
                raise ValueError("weights length does not match labels")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def concat_datasets(parts: list[LabeledDataset]) -> LabeledDataset:
    """Multiset union of datasets (duplicates preserved)."""
    parts = [p for p in parts if len(p) > 0]
    if not parts:
        return LabeledDataset(np.zeros((0, 1)), np.zeros(0, dtype=np.int64))
    feats = np.concatenate([p.features for p in parts], axis=0)
    labels = np.concatenate([p.labels for p in parts])
    if any(p.weights is not None for p in parts):
        ws = [p.weights if p.weights is not None else np.ones(len(p)) for p in parts]
        weights = np.concatenate(ws)
    else:
        weights = None
    return LabeledDataset(feats, labels, weights)


@dataclass
class LearnerConfig:
    n_classes: int = 4
    max_iter: int = 200
    l2_strength: float = 1.0  # lambda = 1/C, sklearn-style sum-loss objective
    standardize: bool = True
    gradient_tol: float = 1e-6
    empty_model_class: int = 0  # majority class of the training pool, set by the game builder


@dataclass
class Model:
    """Fitted multinomial model; `constant_class` short-circuits prediction."""

    weights: np.ndarray | None = None  # (d, C)
    bias: np.ndarray | None = None  # (C,)
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    n_classes: int = 0
    constant_class: int | None = None
    iterations: int = 0
    converged: bool = False
    train_info: dict = field(default_factory=dict)

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if self.constant_class is not None:
            return np.full(features.shape[0], self.constant_class, dtype=np.int64)
        x = (features - self.mean) / self.std
        scores = x @ self.weights + self.bias
        # np.argmax breaks ties toward the lowest class index
        return np.argmax(scores, axis=1)


def _canonical_order(data: LabeledDataset) -> LabeledDataset:
    # Full-batch optimization is order-free only once floating-point summation
    # order is pinned; sort rows lexicographically so any permutation of the
    # same multiset trains identically, bit for bit.
    w = data.weights if data.weights is not None else np.ones(len(data))
    keys = (w, data.labels) + tuple(data.features[:, j] for j in range(data.n_features - 1, -1, -1))
    order = np.lexsort(keys)
    return LabeledDataset(data.features[order], data.labels[order], w[order])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grad(x, y_onehot, w_ex, lam, W, b):
    z = x @ W + b
    zs = z - z.max(axis=1, keepdims=True)
    log_probs = zs - np.log(np.exp(zs).sum(axis=1, keepdims=True))
    loss = -np.sum(w_ex * np.sum(y_onehot * log_probs, axis=1)) + 0.5 * lam * np.sum(W * W)
    p = np.exp(log_probs)
    r = (p - y_onehot) * w_ex[:, None]
    grad_w = x.T @ r + lam * W
    grad_b = r.sum(axis=0)
    return loss, grad_w, grad_b


def train(data: LabeledDataset, cfg: LearnerConfig) -> Model:
    """Fit the model by deterministic full-batch gradient descent.

    Empty training sets yield the configured constant-class baseline model;
    single-class sets yield a constant model for that class. Per-example
    weights enter both the loss and the standardization moments, so a
    duplicated row and a weight-2 row produce the same objective.
    """
    if len(data) == 0:
        return Model(n_classes=cfg.n_classes, constant_class=cfg.empty_model_class)
    classes = np.unique(data.labels)
    if classes.size == 1:
        return Model(n_classes=cfg.n_classes, constant_class=int(classes[0]))

    data = _canonical_order(data)
    w_ex = data.weights
    total_w = w_ex.sum()

    x = data.features
    if cfg.standardize:
        mean = (w_ex[:, None] * x).sum(axis=0) / total_w
        var = (w_ex[:, None] * (x - mean) ** 2).sum(axis=0) / total_w
        std = np.maximum(np.sqrt(var), STD_FLOOR)
    else:
        mean = np.zeros(x.shape[1])
        std = np.ones(x.shape[1])
    x = (x - mean) / std

    n_classes = cfg.n_classes
    y_onehot = np.zeros((len(data), n_classes))
    y_onehot[np.arange(len(data)), data.labels] = 1.0

    W = np.zeros((x.shape[1], n_classes))
    b = np.zeros(n_classes)
    lam = cfg.l2_strength

    loss, gw, gb = _loss_and_grad(x, y_onehot, w_ex, lam, W, b)
    # gradient scale grows with total weight; tolerance is per unit of weight
    tol = cfg.gradient_tol * max(1.0, total_w)
    step = 1.0 / max(1.0, total_w)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm2 = np.sum(gw * gw) + np.sum(gb * gb)
        if max(np.abs(gw).max(), np.abs(gb).max()) <= tol:
            converged = True
            break
        # backtracking line search (Armijo) on the descent direction -grad
        t = min(step * 2.0, 1.0)
        for _ in range(60):
            W_new = W - t * gw
            b_new = b - t * gb
            loss_new, gw_new, gb_new = _loss_and_grad(x, y_onehot, w_ex, lam, W_new, b_new)
            if loss_new <= loss - 1e-4 * t * gnorm2:
                break
            t *= 0.5
        W, b, loss, gw, gb = W_new, b_new, loss_new, gw_new, gb_new
        step = t

    return Model(
        weights=W,
        bias=b,
        mean=mean,
        std=std,
        n_classes=n_classes,
        iterations=it,
        converged=converged,
        train_info={"final_loss": float(loss)},
    )


def accuracy(model: Model, valset: LabeledDataset) -> float:
    """Fraction of validation examples classified correctly."""
    if len(valset) == 0:
        raise ValueError("validation set is empty")
    pred = model.predict(valset.features)
    return float(np.mean(pred == valset.labels))


def majority_class(labels: np.ndarray) -> int:
    """Most frequent class; ties broken toward the lowest class index."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return 0
    counts = np.bincount(labels)
    return int(np.argmax(counts))
