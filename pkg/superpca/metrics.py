from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from superpca.errors import ContractError, ParameterError


@dataclass(frozen=True)
class ConfusionMatrix:
    """
    counts[i][j] = number of test pixels of true class labels[i] predicted as labels[j].
    """

    counts: np.ndarray
    labels: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def size(self) -> int:
        return self.labels.shape[0]


def confusion(true_labels, predicted, labels: Optional[Sequence[int]] = None) -> ConfusionMatrix:
    """
    Build the G x G confusion matrix of a prediction.

    Parameters
    ----------
    true_labels, predicted : array (n,)
        Equal lengths
    labels : sequence of int
        Class ids indexing rows and columns, default the sorted union of both vectors
    """
    true_labels = np.asarray(true_labels).ravel()
    predicted = np.asarray(predicted).ravel()
    if true_labels.shape != predicted.shape:
        raise ContractError(f"{true_labels.shape[0]} true labels but {predicted.shape[0]} predictions")
    if labels is None:
        labels = np.union1d(true_labels, predicted)
    labels = np.asarray(labels)
    if labels.shape[0] == 0:
        return ConfusionMatrix(np.zeros((0, 0), dtype=np.int64), labels)
    counts = sk_confusion_matrix(true_labels, predicted, labels=labels)
    return ConfusionMatrix(counts.astype(np.int64), labels)


def _require_samples(matrix: ConfusionMatrix) -> None:
    if matrix.total == 0:
        raise ParameterError('accuracy is undefined for an empty confusion matrix')


def overall_accuracy(matrix: ConfusionMatrix) -> float:
    """Trace over total."""
    _require_samples(matrix)
    return float(np.trace(matrix.counts) / matrix.total)


def per_class_recall(matrix: ConfusionMatrix) -> Dict[int, float]:
    """Recall of every class with at least one true sample."""
    rows = matrix.counts.sum(axis=1)
    return {int(label): float(matrix.counts[i, i] / rows[i])
            for i, label in enumerate(matrix.labels.tolist()) if rows[i] > 0}


def average_accuracy(matrix: ConfusionMatrix, skip_empty: bool = False) -> float:
    """
    Mean per-class recall.

    Every class needs true samples unless ``skip_empty`` drops the empty ones from the mean.
    """
    _require_samples(matrix)
    rows = matrix.counts.sum(axis=1)
    if not skip_empty and np.any(rows == 0):
        empty = matrix.labels[rows == 0].tolist()
        raise ParameterError(f"average accuracy needs test samples of every class; empty: {empty}")
    recalls = np.divide(np.diag(matrix.counts), rows, out=np.zeros(matrix.size), where=rows > 0)
    if skip_empty:
        recalls = recalls[rows > 0]
    return float(recalls.mean())


def kappa(matrix: ConfusionMatrix) -> float:
    """
    Cohen's kappa (p_o - p_e) / (1 - p_e); 0 when chance agreement is total.
    """
    _require_samples(matrix)
    total = matrix.total
    observed = np.trace(matrix.counts) / total
    chance = float(np.sum(matrix.counts.sum(axis=0) * matrix.counts.sum(axis=1))) / total ** 2
    if chance >= 1.0:
        return 0.0
    return float((observed - chance) / (1.0 - chance))


oa = overall_accuracy
aa = average_accuracy


@dataclass(frozen=True)
class AccuracyReport:
    """OA, AA and Kappa of one prediction, with per-class recalls."""

    oa: float
    aa: float
    kappa: float
    recalls: Dict[int, float]
    matrix: ConfusionMatrix

    @property
    def samples(self) -> int:
        return self.matrix.total

    def as_dict(self) -> Dict[str, float]:
        return {'oa': self.oa, 'aa': self.aa, 'kappa': self.kappa}


def summarize(true_labels, predicted, labels: Optional[Sequence[int]] = None) -> AccuracyReport:
    """
    Score a prediction; AA skips classes without test samples.
    """
    matrix = confusion(true_labels, predicted, labels)
    return AccuracyReport(overall_accuracy(matrix), average_accuracy(matrix, skip_empty=True), kappa(matrix),
                          per_class_recall(matrix), matrix)
