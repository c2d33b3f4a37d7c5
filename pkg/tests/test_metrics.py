import numpy as np
import pytest

from superpca.errors import ContractError, ParameterError
from superpca.metrics import aa, average_accuracy, confusion, kappa, oa, overall_accuracy, per_class_recall, summarize


def _vectors(counts):
    true, pred = [], []
    for i, row in enumerate(counts):
        for j, count in enumerate(row):
            true += [i + 1] * count
            pred += [j + 1] * count
    return np.array(true), np.array(pred)


def test_two_class_example():
    true, pred = _vectors([[40, 10], [20, 30]])
    matrix = confusion(true, pred)
    np.testing.assert_array_equal(matrix.counts, [[40, 10], [20, 30]])
    assert matrix.total == 100 and matrix.size == 2
    assert oa(matrix) == pytest.approx(0.7, abs=1e-12)
    assert aa(matrix) == pytest.approx(0.7, abs=1e-12)
    assert kappa(matrix) == pytest.approx(0.4, abs=1e-12)
    assert per_class_recall(matrix) == pytest.approx({1: 0.8, 2: 0.6})


def test_perfect_prediction():
    true = np.array([1, 2, 3, 3, 2])
    matrix = confusion(true, true)
    assert (overall_accuracy(matrix), average_accuracy(matrix), kappa(matrix)) == (1.0, 1.0, 1.0)


def test_single_sample():
    matrix = confusion([4], [4])
    assert overall_accuracy(matrix) == 1.0
    assert average_accuracy(matrix) == 1.0
    assert kappa(matrix) == 0.0


def test_hand_tally():
    true = [1, 1, 1, 2, 2, 2, 3, 3, 3, 3]
    pred = [1, 2, 1, 2, 2, 3, 3, 3, 1, 3]
    matrix = confusion(true, pred)
    np.testing.assert_array_equal(matrix.counts, [[2, 1, 0], [0, 2, 1], [1, 0, 3]])
    assert oa(matrix) == pytest.approx(0.7)
    assert aa(matrix) == pytest.approx((2 / 3 + 2 / 3 + 3 / 4) / 3)
    assert kappa(matrix) == pytest.approx((0.7 - 0.34) / 0.66)


def test_labels_fix_the_matrix_axes():
    matrix = confusion([1, 2], [1, 1], labels=[1, 2, 5])
    assert matrix.counts.shape == (3, 3)
    assert matrix.labels.tolist() == [1, 2, 5]
    with pytest.raises(ParameterError, match='empty: \\[5\\]'):
        average_accuracy(matrix)
    assert average_accuracy(matrix, skip_empty=True) == pytest.approx(0.5)


def test_chance_level_kappa():
    rng = np.random.default_rng(0)
    true = rng.integers(1, 5, size=20000)
    pred = rng.integers(1, 5, size=20000)
    assert abs(kappa(confusion(true, pred))) < 0.03


def test_sample_order_does_not_matter():
    rng = np.random.default_rng(1)
    true = rng.integers(1, 6, size=300)
    pred = np.where(rng.random(300) < 0.7, true, rng.integers(1, 6, size=300))
    order = rng.permutation(300)
    first, second = summarize(true, pred), summarize(true[order], pred[order])
    assert first.as_dict() == pytest.approx(second.as_dict(), abs=1e-12)


def test_errors():
    with pytest.raises(ContractError):
        confusion([1, 2], [1])
    empty = confusion([], [])
    with pytest.raises(ParameterError, match='empty confusion matrix'):
        overall_accuracy(empty)
    with pytest.raises(ParameterError):
        kappa(empty)


def test_summarize():
    true, pred = _vectors([[40, 10], [20, 30]])
    report = summarize(true, pred, labels=[1, 2, 3])
    assert report.samples == 100
    assert report.as_dict() == pytest.approx({'oa': 0.7, 'aa': 0.7, 'kappa': 0.4})
    assert set(report.recalls) == {1, 2}
    assert report.matrix.counts.shape == (3, 3)
