"""Downstream tasks over frozen embeddings: genre and rating-class
prediction with a linear softmax probe, scored by weighted F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DimensionError, RangeError
from .seeding import rng_for


def rating_to_class(rating: float) -> int:
    """Round half up to the nearest integer class in 1..10."""
    if not 1.0 <= rating <= 10.0:
        raise RangeError(f"rating {rating} outside [1, 10]")
    return int(min(10, max(1, np.floor(rating + 0.5))))


@dataclass
class ConfusionTable:
    counts: np.ndarray  # (C, C), rows = true class
    labels: list

    @classmethod
    def from_predictions(cls, true_ids, pred_ids, labels) -> "ConfusionTable":
        C = len(labels)
        counts = np.zeros((C, C), dtype=np.int64)
        for t, p in zip(true_ids, pred_ids):
            counts[t, p] += 1
        return cls(counts, list(labels))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def weighted_f1(cm: ConfusionTable) -> float:
    """Support-weighted mean of per-class F1; a class with P+R == 0 scores 0."""
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise RangeError("confusion table is empty")
    score = 0.0
    for c in range(counts.shape[0]):
        support = counts[c].sum()
        if support == 0:
            continue
        tp = counts[c, c]
        predicted = counts[:, c].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        score += (support / total) * f1
    return float(score)


def per_class_f1(cm: ConfusionTable) -> dict:
    out = {}
    for c, label in enumerate(cm.labels):
        tp = cm.counts[c, c]
        support = cm.counts[c].sum()
        predicted = cm.counts[:, c].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        out[label] = float(2 * precision * recall / (precision + recall)) if (precision + recall) > 0 else 0.0
    return out


@dataclass
class LinearProbe:
    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        return (embeddings @ self.weights.T + self.bias).argmax(axis=1)


def fit_probe(
    embeddings: np.ndarray,
    class_ids: np.ndarray,
    num_classes: int,
    epochs: int = 300,
    lr: float = 0.5,
    seed: int = 0,
) -> LinearProbe:
    """Multinomial logistic regression by full-batch gradient descent."""
    present = set(int(c) for c in class_ids)
    missing = set(range(num_classes)) - present
    if missing:
        raise CoverageError(f"training set has no examples for class id(s) {sorted(missing)}")
    n, d = embeddings.shape
    x = embeddings.astype(np.float64)
    # standardize so one lr works across embedding scales
    mu = x.mean(axis=0)
    sd = x.std(axis=0) + 1e-8
    x = (x - mu) / sd
    y = np.zeros((n, num_classes))
    y[np.arange(n), class_ids] = 1.0
    rng = rng_for(seed, "probe")
    w = rng.standard_normal((num_classes, d)) * 0.01
    b = np.zeros(num_classes)
    for _ in range(epochs):
        logits = x @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - y) / n
        gw = g.T @ x + 1e-4 * w
        gb = g.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
    # fold the standardization back into the probe
    w_raw = w / sd
    b_raw = b - w_raw @ mu
    return LinearProbe(w_raw, b_raw)


@dataclass
class TaskResult:
    task: str
    weighted_f1: float
    confusion: ConfusionTable
    per_class: dict


def evaluate_task(
    embeddings: np.ndarray,
    items,
    train_items,
    test_items,
    task: str,
    probe_seed: int = 0,
    probe_epochs: int = 300,
) -> TaskResult:
    """Fit a probe on the train split's embeddings, score the test split.

    embeddings are row-aligned with items; the splits are subsets of items.
    """
    if task not in ("genre", "rating"):
        raise RangeError(f"task must be genre or rating, got {task!r}")
    index = {item.id: i for i, item in enumerate(items)}
    if len(index) != len(items):
        raise DimensionError("duplicate item ids")

    if task == "genre":
        raw_label = {item.id: item.genre for item in items}
    else:
        raw_label = {item.id: rating_to_class(item.rating) for item in items}
    labels = sorted({raw_label[item.id] for item in list(train_items) + list(test_items)})
    label_of = {item.id: labels.index(raw_label[item.id]) for item in items}

    def gather(subset):
        rows = np.stack([embeddings[index[item.id]] for item in subset])
        ids = np.array([label_of[item.id] for item in subset])
        return rows, ids

    x_train, y_train = gather(train_items)
    x_test, y_test = gather(test_items)

    # The probe is fit over the classes the train split actually covers; a
    # test-only class can never be predicted and contributes F1 = 0.
    train_classes = sorted(set(int(c) for c in y_train))
    remap = {full: local for local, full in enumerate(train_classes)}
    probe = fit_probe(
        x_train, np.array([remap[int(c)] for c in y_train]), len(train_classes), seed=probe_seed, epochs=probe_epochs
    )
    preds = np.array([train_classes[p] for p in probe.predict(x_test)])
    cm = ConfusionTable.from_predictions(y_test, preds, labels)
    return TaskResult(task, weighted_f1(cm), cm, per_class_f1(cm))


def majority_baseline_accuracy(class_ids: np.ndarray) -> float:
    """Accuracy of always predicting the most common class."""
    _, counts = np.unique(class_ids, return_counts=True)
    return float(counts.max() / counts.sum())
