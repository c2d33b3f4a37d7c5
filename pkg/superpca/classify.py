from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from superpca.errors import ContractError, ParameterError

__pdoc__ = {
    'superpca.classify.LinearMarginModel.standardize': False,
}

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOLERANCE = 1e-9
UNLABELED = 0
DEFAULT_BATCH_SIZE = 16


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids 1..G; 0 marks unlabeled pixels."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ContractError(f"label map must be a 2-D grid, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ContractError('label map holds negative ids')
        object.__setattr__(self, 'labels', labels.astype(np.int64))

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    @property
    def classes(self) -> np.ndarray:
        values = np.unique(self.labels)
        return values[values != UNLABELED]

    def flat(self) -> np.ndarray:
        return self.labels.ravel()


@dataclass(frozen=True)
class Split:
    """
    One realization of the per-class sampling protocol.

    ``train`` and ``test`` hold flat pixel indices (sorted, disjoint); ``per_class`` maps each
    included class to its training count min(T, floor(n / 2)).
    """

    train: np.ndarray
    test: np.ndarray
    per_class: Dict[int, int]
    excluded: List[int] = field(default_factory=list)


def split_samples(gt: LabelMap, train_per_class: int, seed: int) -> Split:
    """
    Draw T training pixels per class, at most half of each class, the rest for testing.

    Classes with fewer than 2 labeled pixels are excluded with a warning; unlabeled pixels
    are never sampled.

    Parameters
    ----------
    gt : LabelMap
        Ground truth
    train_per_class : int
        T >= 1
    seed : int
        Seed of the sampling generator

    Returns
    -------
        Split
    """
    if train_per_class < 1:
        raise ParameterError(f"training samples per class must be >= 1, got {train_per_class}")
    rng = np.random.default_rng(seed)
    flat = gt.flat()
    train, test, per_class, excluded = [], [], {}, []
    for label in gt.classes.tolist():
        members = np.flatnonzero(flat == label)
        if members.shape[0] < 2:
            logger.warning('class %d has %d labeled pixel(s) and is excluded from the split', label, members.shape[0])
            excluded.append(label)
            continue
        count = min(train_per_class, members.shape[0] // 2)
        shuffled = rng.permutation(members)
        train.append(shuffled[:count])
        test.append(shuffled[count:])
        per_class[label] = count
    empty = np.zeros(0, dtype=np.int64)
    return Split(np.sort(np.concatenate(train or [empty])), np.sort(np.concatenate(test or [empty])),
                 per_class, excluded)


def _check_features(train_feats: np.ndarray, train_labels: np.ndarray, test_feats: np.ndarray):
    train_feats = np.atleast_2d(np.asarray(train_feats, dtype=np.float64))
    test_feats = np.atleast_2d(np.asarray(test_feats, dtype=np.float64))
    train_labels = np.asarray(train_labels)
    if train_feats.shape[0] == 0 or train_labels.shape[0] == 0:
        raise ParameterError('classification needs a non-empty training set')
    if train_feats.shape[0] != train_labels.shape[0]:
        raise ContractError(f"{train_feats.shape[0]} training features but {train_labels.shape[0]} labels")
    if train_feats.shape[1] != test_feats.shape[1]:
        raise ContractError(f"training features have length {train_feats.shape[1]}, "
                            f"test features {test_feats.shape[1]}")
    return train_feats, train_labels, test_feats


def nn_classify(train_feats, train_labels, test_feats, chunk: int = 2048) -> np.ndarray:
    """
    Label every test point with its Euclidean-nearest training point.

    Distance ties go to the smallest training index.
    """
    train_feats, train_labels, test_feats = _check_features(train_feats, train_labels, test_feats)
    predicted = np.empty(test_feats.shape[0], dtype=train_labels.dtype)
    for start in range(0, test_feats.shape[0], chunk):
        distances = cdist(test_feats[start:start + chunk], train_feats, 'sqeuclidean')
        predicted[start:start + chunk] = train_labels[np.argmin(distances, axis=1)]
    return predicted


@dataclass
class LinearMarginModel:
    """
    One-vs-rest linear max-margin classifiers on standardized features.

    Properties
    ----------
    classes : np.ndarray
        Sorted class ids, row g of ``weights`` separates classes[g] from the rest
    weights : np.ndarray
        (G, F) weight vectors
    bias : np.ndarray
        (G,) offsets
    offset, scale : np.ndarray
        Feature standardization learned from the training set
    objective : list
        Mean regularized hinge objective after every epoch
    """

    classes: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    objective: List[float] = field(default_factory=list)

    def standardize(self, feats: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(feats, dtype=np.float64)) - self.offset) / self.scale

    def decision_function(self, feats) -> np.ndarray:
        """(n, G) decision values."""
        feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
        if feats.ndim != 2 or feats.shape[1] != self.weights.shape[1]:
            raise ContractError(f"model expects {self.weights.shape[1]} features, got shape {feats.shape}")
        return self.standardize(feats) @ self.weights.T + self.bias


def _class_objectives(feats, signs, weights, bias, lam) -> np.ndarray:
    margins = signs * (feats @ weights.T + bias)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return 0.5 * lam * np.sum(weights * weights, axis=1) + hinge


def train_linear_margin(train_feats, train_labels, reg: float = 10.0, epochs: int = 200, seed: int = 0,
                        batch_size: Optional[int] = DEFAULT_BATCH_SIZE) -> LinearMarginModel:
    """
    Train one-vs-rest hinge-loss classifiers by stochastic projected subgradient descent.

    Each class minimizes (lam / 2) ||w||^2 + mean hinge loss with lam = 1 / reg and step size
    1 / (lam t). Every epoch walks a seeded shuffle of the training set in mini-batches and
    the iterates are averaged over all steps taken so far. At the end of an epoch a class
    keeps the running average only if it does not raise that class's objective, so the
    recorded objective never increases. ``batch_size=None`` takes full-batch steps instead,
    which makes the model depend only on the empirical distribution (duplicating every point
    changes nothing).

    Parameters
    ----------
    train_feats : array (n, F)
    train_labels : array (n,)
        At least 2 distinct classes
    reg : float
        Regularization constant C_reg > 0
    epochs : int
    seed : int
        Seed of the epoch shuffles
    batch_size : int
        Mini-batch size, None for full-batch steps

    Returns
    -------
        LinearMarginModel
    """
    train_feats, train_labels, _ = _check_features(train_feats, train_labels, np.atleast_2d(train_feats))
    classes = np.unique(train_labels)
    if classes.shape[0] < 2:
        raise ParameterError('linear margin training needs at least 2 classes')
    if not reg > 0:
        raise ParameterError(f"regularization constant must be positive, got {reg}")
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    if batch_size is not None and batch_size < 1:
        raise ParameterError(f"batch size must be >= 1, got {batch_size}")

    offset = train_feats.mean(axis=0)
    scale = train_feats.std(axis=0)
    scale[scale == 0] = 1.0
    feats = (train_feats - offset) / scale
    signs = np.where(train_labels[:, None] == classes[None, :], 1.0, -1.0)
    count, width = feats.shape
    size = count if batch_size is None else batch_size
    lam = 1.0 / reg
    radius = 1.0 / np.sqrt(lam)
    weights = np.zeros((classes.shape[0], width))
    bias = np.zeros(classes.shape[0])
    mean_weights, mean_bias = weights.copy(), bias.copy()
    best_weights, best_bias = weights.copy(), bias.copy()
    best = _class_objectives(feats, signs, weights, bias, lam)
    rng = np.random.default_rng(seed)
    objective = []
    step = 0
    for _ in range(epochs):
        order = np.arange(count) if batch_size is None else rng.permutation(count)
        for start in range(0, count, size):
            batch = order[start:start + size]
            step += 1
            eta = 1.0 / (lam * step)
            x, y = feats[batch], signs[batch]
            violated = y * (y * (x @ weights.T + bias) < 1.0)
            weights = (1.0 - eta * lam) * weights + eta * (violated.T @ x) / batch.shape[0]
            bias = bias + eta * violated.sum(axis=0) / batch.shape[0]
            norms = np.linalg.norm(weights, axis=1)
            shrink = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
            weights = weights * shrink[:, None]
            mean_weights += (weights - mean_weights) / step
            mean_bias += (bias - mean_bias) / step
        current = _class_objectives(feats, signs, mean_weights, mean_bias, lam)
        improved = current <= best
        best = np.where(improved, current, best)
        best_weights[improved] = mean_weights[improved]
        best_bias[improved] = mean_bias[improved]
        objective.append(float(np.mean(best)))
    logger.debug('linear margin: %d classes, %d steps, objective %.6g', classes.shape[0], step, objective[-1])
    return LinearMarginModel(classes, best_weights, best_bias, offset, scale, objective)


def classify_linear(model: LinearMarginModel, test_feats) -> np.ndarray:
    """Argmax of the decision values; ties go to the smallest class id."""
    return model.classes[np.argmax(model.decision_function(test_feats), axis=1)]


def classify_features(method: str, train_feats, train_labels, test_feats, seed: int = 0, **options) -> np.ndarray:
    """
    Dispatch to a classifier by name.

    Parameters
    ----------
    method : str
        'nn' or 'linear'
    options :
        reg, epochs, batch_size for the linear classifier
    """
    if method == 'nn':
        return nn_classify(train_feats, train_labels, test_feats)
    if method == 'linear':
        model = train_linear_margin(train_feats, train_labels, options.get('reg', 10.0),
                                    options.get('epochs', 200), seed,
                                    options.get('batch_size', DEFAULT_BATCH_SIZE))
        return classify_linear(model, test_feats)
    raise ParameterError(f"unknown classifier {method!r}; use nn or linear")


@dataclass(frozen=True)
class VoteProfile:
    """
    Labels l_j of the 2C+1 classifiers for one pixel and their voting weights alpha_j.

    Weights default to the equal voting strength 1 / (2C+1).
    """

    labels: Sequence[int]
    weights: Optional[Sequence[float]] = None

    def resolved_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.labels), 1.0 / len(self.labels))
        return np.asarray(self.weights, dtype=np.float64)


def _vote_weights(count: int, weights, check_sum: bool) -> np.ndarray:
    if weights is None:
        return np.full(count, 1.0 / count)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (count,):
        raise ContractError(f"{count} votes but {weights.shape[0] if weights.ndim else 0} weights")
    if np.any(weights < 0):
        raise ParameterError('voting weights must be non-negative')
    if check_sum and abs(weights.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ParameterError(f"voting weights must sum to 1, got {weights.sum()!r}")
    return weights


def majority_vote(profile: VoteProfile, check_sum: bool = True) -> int:
    """
    argmax_i sum_j alpha_j I(l_j = i); ties go to the smallest class id.

    With the default equal weights this is plurality voting.
    """
    labels = np.asarray(profile.labels)
    if labels.shape[0] == 0:
        raise ParameterError('majority vote needs at least one vote')
    weights = _vote_weights(labels.shape[0], profile.weights, check_sum)
    classes, index = np.unique(labels, return_inverse=True)
    support = np.zeros(classes.shape[0])
    for position, weight in zip(index.tolist(), weights.tolist()):
        support[position] += weight
    return int(classes[np.argmax(support)])


def fuse_label_maps(predictions, weights=None, check_sum: bool = True) -> np.ndarray:
    """
    Majority-vote fusion of J label vectors, pixel by pixel.

    Parameters
    ----------
    predictions : array (J, n)
        Row j holds classifier j's labels for n pixels
    weights : array (J,)
        Voting weights, None for equal strength

    Returns
    -------
        Fused labels (n,), same tie rule as majority_vote
    """
    predictions = np.atleast_2d(np.asarray(predictions))
    if predictions.shape[0] == 0:
        raise ParameterError('fusion needs at least one prediction')
    weights = _vote_weights(predictions.shape[0], weights, check_sum)
    classes, index = np.unique(predictions, return_inverse=True)
    index = index.reshape(predictions.shape)
    support = np.zeros((predictions.shape[1], classes.shape[0]))
    pixels = np.arange(predictions.shape[1])
    for row, weight in zip(index, weights.tolist()):
        support[pixels, row] += weight
    return classes[np.argmax(support, axis=1)]
