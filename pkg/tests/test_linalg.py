import numpy as np
import pytest

from superpca.errors import ContractError, ParameterError
from superpca.linalg import (EigenSpectrum, covariance, eigen_ratio, fit_pca, project, reconstruct,
                             round_robin_pairs, sym_eigen)


def random_symmetric(rng, n):
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2.0


def random_orthonormal(rng, rows, cols):
    q, _ = np.linalg.qr(rng.normal(size=(rows, cols)))
    return q


def check_spectrum(a, spectrum):
    values, vectors = spectrum.values, spectrum.vectors
    assert np.all(np.diff(values) <= 0)
    assert np.max(np.abs(vectors.T @ vectors - np.eye(a.shape[0]))) <= 1e-10
    for k in range(a.shape[0]):
        residual = np.linalg.norm(a @ vectors[:, k] - values[k] * vectors[:, k])
        assert residual <= 1e-8 * (1 + abs(values[k]))
        pivot = np.argmax(np.abs(vectors[:, k]))
        assert vectors[pivot, k] > 0


def test_round_robin_pairs_visit_every_pair_once():
    for n in range(1, 10):
        seen = []
        for p, q in round_robin_pairs(n):
            assert len(set(p.tolist()) | set(q.tolist())) == 2 * len(p), "pairs of a round are disjoint"
            seen.extend(zip(p.tolist(), q.tolist()))
        assert sorted(seen) == [(i, j) for i in range(n) for j in range(i + 1, n)]


def test_covariance():
    np.testing.assert_array_equal(covariance(np.array([[1.0], [2.0]])), np.zeros((2, 2)))
    np.testing.assert_allclose(covariance(np.array([[0.0, 2.0], [0.0, 0.0]])), [[1.0, 0.0], [0.0, 0.0]])

    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 20))
    mean = m.mean(axis=1)
    oracle = np.zeros((4, 4))
    for i in range(20):
        for r in range(4):
            for c in range(4):
                oracle[r, c] += (m[r, i] - mean[r]) * (m[c, i] - mean[c]) / 20
    np.testing.assert_allclose(covariance(m), oracle, atol=1e-12)
    with pytest.raises(ParameterError):
        covariance(np.zeros((3, 0)))


def test_sym_eigen_examples():
    np.testing.assert_allclose(sym_eigen(np.eye(3)).values, [1.0, 1.0, 1.0])

    spectrum = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(spectrum.values, [3.0, 1.0], atol=1e-12)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(np.abs(spectrum.vectors[:, 0]), [s, s], atol=1e-12)
    np.testing.assert_allclose(np.abs(spectrum.vectors[:, 1]), [s, s], atol=1e-12)
    assert spectrum.vectors[0, 1] * spectrum.vectors[1, 1] < 0

    rng = np.random.default_rng(1)
    a = random_symmetric(rng, 8)
    spectrum = sym_eigen(a)
    assert spectrum.values.sum() == pytest.approx(np.trace(a), abs=1e-9)
    assert np.prod(spectrum.values) == pytest.approx(np.linalg.det(a), rel=1e-6, abs=1e-9)


def test_sym_eigen_matches_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        n = int(rng.integers(1, 13))
        a = random_symmetric(rng, n)
        spectrum = sym_eigen(a)
        oracle = np.sort(np.linalg.eigvalsh(a))[::-1]
        scale = max(1.0, np.abs(oracle).max())
        np.testing.assert_allclose(spectrum.values, oracle, rtol=0, atol=1e-8 * scale)
        check_spectrum(a, spectrum)


def test_sym_eigen_widely_spread_spectrum():
    # eigenvalues over seven decades; the off-diagonal mass is tiny next to the diagonal
    rng = np.random.default_rng(11)
    for trial in range(20):
        q = random_orthonormal(rng, 6, 6)
        a = q @ np.diag([1e4, 3e2, 1.0, 1e-3, 0.0, -2.0]) @ q.T
        a = (a + a.T) / 2.0
        check_spectrum(a, sym_eigen(a))

    nearly_diagonal = np.diag([5e4, 2e4, 7.0, 1e-2]) + 1e-7 * random_symmetric(rng, 4)
    check_spectrum(nearly_diagonal, sym_eigen(nearly_diagonal))


def test_sym_eigen_tiny_coupling_stays_finite():
    a = np.array([[1.0, 1.0, 1e-160], [1.0, 3.0, 0.0], [1e-160, 0.0, 6.0]])
    with np.errstate(over='raise', divide='raise', invalid='raise'):
        spectrum = sym_eigen(a)
    assert np.all(np.isfinite(spectrum.values)) and np.all(np.isfinite(spectrum.vectors))
    check_spectrum(a, spectrum)


def test_sym_eigen_permutation_invariance():
    rng = np.random.default_rng(4)
    a = random_symmetric(rng, 7)
    perm = np.eye(7)[rng.permutation(7)]
    np.testing.assert_allclose(sym_eigen(a).values, sym_eigen(perm.T @ a @ perm).values, atol=1e-9)


def test_sym_eigen_errors():
    with pytest.raises(ContractError, match='square'):
        sym_eigen(np.zeros((2, 3)))
    with pytest.raises(ContractError, match='symmetric'):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_fit_pca_examples():
    t = np.linspace(-1, 1, 9)
    line = np.vstack([t, 3 * t])
    basis = fit_pca(line, 1)
    cov = covariance(line)
    assert np.trace(basis.W.T @ cov @ basis.W) == pytest.approx(np.trace(cov), abs=1e-12)

    rng = np.random.default_rng(5)
    m = rng.normal(size=(5, 40))
    full = fit_pca(m, 5)
    cov = covariance(m)
    assert np.trace(full.W.T @ cov @ full.W) == pytest.approx(np.trace(cov), abs=1e-9)
    assert np.max(np.abs(full.W.T @ full.W - np.eye(5))) <= 1e-10

    with pytest.raises(ParameterError, match='d=6'):
        fit_pca(m, 6)
    with pytest.raises(ParameterError):
        fit_pca(m, 0)


def test_fit_pca_optimality():
    rng = np.random.default_rng(6)
    for trial in range(50):
        bands = int(rng.integers(2, 8))
        d = int(rng.integers(1, bands + 1))
        m = rng.normal(size=(bands, int(rng.integers(3, 30))))
        basis = fit_pca(m, d)
        cov = covariance(m)
        best = np.trace(basis.W.T @ cov @ basis.W)
        assert best == pytest.approx(basis.spectrum.values[:d].sum(), abs=1e-9)
        candidates = [np.trace(q.T @ cov @ q) for q in (random_orthonormal(rng, bands, d) for _ in range(1000))]
        assert best >= max(candidates) - 1e-12


def test_project_and_reconstruct():
    rng = np.random.default_rng(7)
    m = rng.normal(size=(4, 10))
    basis = fit_pca(m, 4)
    np.testing.assert_allclose(reconstruct(basis, project(basis, m)), m, atol=1e-9)
    np.testing.assert_allclose(project(basis, basis.mean[:, None]), np.zeros((4, 1)), atol=1e-12)

    fixed = np.arange(18, dtype=float).reshape(3, 6) ** 1.5
    basis = fit_pca(fixed, 2)
    oracle = basis.W.T @ (fixed - fixed.mean(axis=1, keepdims=True))
    projected = project(basis, fixed)
    assert projected.shape == (2, 6)
    np.testing.assert_allclose(projected, oracle, atol=1e-12)

    x, z = rng.normal(size=(3, 1)), rng.normal(size=(3, 1))
    centered = lambda v: v + basis.mean[:, None]
    np.testing.assert_allclose(project(basis, centered(2.0 * x - 3.0 * z)),
                               2.0 * project(basis, centered(x)) - 3.0 * project(basis, centered(z)), atol=1e-10)

    with pytest.raises(ContractError):
        project(basis, np.zeros((4, 2)))
    with pytest.raises(ContractError):
        reconstruct(basis, np.zeros((3, 2)))


def test_fit_pca_rank_deficient():
    rng = np.random.default_rng(8)
    m = rng.normal(size=(6, 3))
    basis = fit_pca(m, 6)
    assert np.all(basis.spectrum.values >= 0)
    assert np.max(np.abs(basis.W.T @ basis.W - np.eye(6))) <= 1e-10


def test_eigen_ratio():
    def spectrum(*values):
        return EigenSpectrum(np.array(values, dtype=float), np.eye(len(values)))

    assert eigen_ratio(spectrum(4, 2, 1)) == 2.0
    assert eigen_ratio(spectrum(3, 3)) == 1.0
    assert eigen_ratio(spectrum(5, 0)) == pytest.approx(5e15)
    with pytest.raises(ParameterError):
        eigen_ratio(spectrum(1))
