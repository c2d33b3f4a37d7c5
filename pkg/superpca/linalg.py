from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from superpca.cube import PixelMatrix
from superpca.errors import ContractError, ParameterError

__pdoc__ = {
    'superpca.linalg.round_robin_pairs': False,
}

SYMMETRY_TOLERANCE = 1e-12
RATIO_EPSILON = 1e-15


@dataclass(frozen=True)
class EigenSpectrum:
    """
    Eigenvalues sorted non-increasing with matching orthonormal eigenvector columns.

    Each eigenvector's largest-magnitude entry is positive.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def order(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ProjectionBasis:
    """
    A fitted PCA transform y = W^T (x - mean).

    Properties
    ----------
    W : np.ndarray
        (L, d) matrix with orthonormal columns
    mean : np.ndarray
        length-L centering vector
    spectrum : EigenSpectrum
        full spectrum of the fitted covariance
    """

    W: np.ndarray
    mean: np.ndarray
    spectrum: EigenSpectrum

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W.shape[1]


def covariance(matrix: PixelMatrix) -> np.ndarray:
    """
    Population covariance (1/P) sum (x_i - mean)(x_i - mean)^T of the columns.

    Parameters
    ----------
    matrix : PixelMatrix
        (L, P) matrix, P >= 1

    Returns
    -------
        (L, L) symmetric positive semidefinite matrix
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] < 1:
        raise ParameterError(f"covariance needs an (L, P) matrix with P >= 1, got shape {matrix.shape}")
    centered = matrix - matrix.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / matrix.shape[1]
    return (cov + cov.T) / 2.0


@functools.lru_cache(maxsize=64)
def round_robin_pairs(n: int):
    """
    Pair orderings of a parallel cyclic Jacobi sweep.

    Returns n-1 (or n for odd n) rounds, each a tuple (p, q) of index arrays holding disjoint
    pairs with p < q; together the rounds visit every pair exactly once.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = sorted(
            (min(a, b), max(a, b))
            for a, b in ((players[i], players[m - 1 - i]) for i in range(m // 2))
            if a < n and b < n
        )
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[pivots, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return vectors * signs


def sym_eigen(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> EigenSpectrum:
    """
    Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep rotates every off-diagonal pair once, n/2 disjoint pairs at a time. Sweeps stop
    once the off-diagonal Frobenius norm is at most ``tol`` times the Frobenius norm of ``a``,
    when a sweep no longer shrinks it, or after ``max_sweeps``.

    Parameters
    ----------
    a : np.ndarray
        Square symmetric matrix (entries symmetric within 1e-12 absolute)

    Returns
    -------
        EigenSpectrum
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"sym_eigen needs a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOLERANCE:
        raise ContractError('sym_eigen needs a symmetric matrix')
    n = a.shape[0]
    vectors = np.eye(n)
    threshold = tol * np.linalg.norm(a)
    previous = np.inf

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold or off >= previous:
            break
        previous = off
        for p, q in round_robin_pairs(n):
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            # tangent of the rotation angle; no cotangent, so a tiny a_pq cannot overflow
            d = a[q, q] - a[p, p]
            t = np.where(d >= 0, 1.0, -1.0) * (2.0 * apq) / (np.abs(d) + np.hypot(d, 2.0 * apq))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = col_p * c - col_q * s
            a[:, q] = col_p * s + col_q * c
            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0

            vec_p, vec_q = vectors[:, p].copy(), vectors[:, q].copy()
            vectors[:, p] = vec_p * c - vec_q * s
            vectors[:, q] = vec_p * s + vec_q * c

    values = np.diag(a).copy()
    order = np.argsort(-values, kind='stable')
    return EigenSpectrum(values[order], _fix_signs(vectors[:, order]))


def fit_pca(matrix: PixelMatrix, d: int) -> ProjectionBasis:
    """
    Fit the d leading principal directions of the columns of ``matrix``.

    W maximizes Tr(W^T Cov W) over orthonormal (L, d) matrices. Eigenvalues that are negative
    only through rounding (|lambda| < 1e-10 lambda_1) are clamped to zero.

    Parameters
    ----------
    matrix : PixelMatrix
        (L, P) matrix
    d : int
        Output dimension, 1 <= d <= L

    Returns
    -------
        ProjectionBasis
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    bands = matrix.shape[0]
    if not 1 <= d <= bands:
        raise ParameterError(f"PCA output dimension must satisfy 1 <= d <= L={bands}, got d={d}")
    spectrum = sym_eigen(covariance(matrix))
    values = spectrum.values.copy()
    top = max(values[0], 0.0)
    values[(values < 0) & (np.abs(values) < 1e-10 * top)] = 0.0
    if top == 0.0:
        values[:] = np.maximum(values, 0.0)
    spectrum = EigenSpectrum(values, spectrum.vectors)
    return ProjectionBasis(spectrum.vectors[:, :d].copy(), matrix.mean(axis=1), spectrum)


def project(basis: ProjectionBasis, matrix: PixelMatrix) -> PixelMatrix:
    """Map every column x_i to W^T (x_i - mean); the result has d rows."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != basis.input_dim:
        raise ContractError(f"matrix with {matrix.shape[0] if matrix.ndim == 2 else '?'} rows does not match "
                            f"a basis fitted on {basis.input_dim} bands")
    return basis.W.T @ (matrix - basis.mean[:, None])


def reconstruct(basis: ProjectionBasis, scores: PixelMatrix) -> PixelMatrix:
    """Map reduced columns back to spectra: W y + mean."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] != basis.output_dim:
        raise ContractError(f"scores do not match a basis with {basis.output_dim} components")
    return basis.W @ scores + basis.mean[:, None]


def eigen_ratio(spectrum: EigenSpectrum) -> float:
    """lambda_1 / max(lambda_2, 1e-15); larger values mean a more dominant first direction."""
    if spectrum.order < 2:
        raise ParameterError(f"eigen ratio needs at least 2 eigenvalues, got {spectrum.order}")
    return float(spectrum.values[0] / max(spectrum.values[1], RATIO_EPSILON))
