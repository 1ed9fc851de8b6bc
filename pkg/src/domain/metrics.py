# src/domain/metrics.py
"""
Classification metrics for the domain classifier
"""

from typing import Tuple

import numpy as np

from src.errors import ShapeError


def _pair(predictions, labels) -> Tuple[np.ndarray, np.ndarray]:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ShapeError(f"predictions {predictions.shape} and labels {labels.shape} differ")
    return predictions, labels


def confusion_counts(predictions, labels, positive_class: int = 0) -> Tuple[int, int, int, int]:
    """(TP, FP, FN, TN) with respect to positive_class"""
    predictions, labels = _pair(predictions, labels)
    pred_pos = predictions == positive_class
    true_pos = labels == positive_class
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    tn = int(np.sum(~pred_pos & ~true_pos))
    return tp, fp, fn, tn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """2TP / (2TP + FP + FN); 0 when there are no positives anywhere"""
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def f1_score(predictions, labels, positive_class: int = 0) -> float:
    tp, fp, fn, _ = confusion_counts(predictions, labels, positive_class)
    return f1_from_counts(tp, fp, fn)


def accuracy(predictions, labels) -> float:
    predictions, labels = _pair(predictions, labels)
    if predictions.size == 0:
        return 0.0
    return float(np.mean(predictions == labels))


def balanced_accuracy(predictions, labels) -> float:
    """Mean per-class recall over the classes present in labels"""
    predictions, labels = _pair(predictions, labels)
    recalls = [float(np.mean(predictions[labels == c] == c)) for c in np.unique(labels)]
    return float(np.mean(recalls)) if recalls else 0.0
