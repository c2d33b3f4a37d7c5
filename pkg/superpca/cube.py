from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from superpca.errors import ContractError, ParameterError

__pdoc__ = {
    'superpca.cube.HsiCube.__post_init__': False,
}

logger = logging.getLogger(__name__)

# A PixelMatrix is an (L, P) float array whose column i holds the spectrum of flat pixel i,
# with pixels flattened row-major (row * cols + col). Every module relies on this ordering.
PixelMatrix = np.ndarray

# guide images are kept on a fixed decimal grid; rounding noise from the band means stays below it
GUIDE_DECIMALS = 8


@dataclass(frozen=True)
class HsiCube:
    """
    A hyperspectral cube stored band-sequentially.

    ``data`` has shape (bands, rows, cols): band-major, then row-major inside a band, the
    same layout as the HSIF payload. Values are reflectances (dimensionless) held as float64.

    Examples
    --------
    - from a (rows, cols, bands) array as most readers return it
    >>> cube = HsiCube.from_pixels(array)
    >>> cube.rows, cube.cols, cube.bands
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ContractError(f"cube data must be a non-empty (bands, rows, cols) array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ContractError('cube data contains NaN or Inf values')
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_pixels(cls, array: np.ndarray) -> HsiCube:
        """Build a cube from a (rows, cols, bands) array."""
        array = np.asarray(array)
        if array.ndim != 3:
            raise ContractError(f"expected a (rows, cols, bands) array, got shape {array.shape}")
        return cls(np.transpose(array, (2, 0, 1)))

    def to_pixels(self) -> np.ndarray:
        """The cube as a (rows, cols, bands) array."""
        return np.transpose(self.data, (1, 2, 0))

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def pixels(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class GuideImage:
    """Single-band image normalized to [0, 1] that drives superpixel segmentation."""

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def reshape_cube(cube: HsiCube) -> PixelMatrix:
    """
    Flatten a cube to its (L, P) pixel matrix.

    Parameters
    ----------
    cube : HsiCube

    Returns
    -------
        PixelMatrix whose column ``row * cols + col`` is the spectrum of that pixel
    """
    return cube.data.reshape(cube.bands, cube.pixels).copy()


def cube_from_matrix(matrix: PixelMatrix, rows: int, cols: int) -> HsiCube:
    """Inverse of reshape_cube."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[1] != rows * cols:
        raise ContractError(f"pixel matrix of shape {matrix.shape} does not hold {rows}x{cols} pixels")
    return HsiCube(matrix.reshape(matrix.shape[0], rows, cols))


def _window_offsets(radius: int):
    return [(dy, dx) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)]


def _shifted(pixels: np.ndarray, dy: int, dx: int):
    """Neighbor values at offset (dy, dx) for every pixel plus the in-bounds mask."""
    rows, cols = pixels.shape[:2]
    shifted = np.zeros_like(pixels)
    valid = np.zeros((rows, cols), dtype=bool)
    dst_r = slice(max(0, -dy), rows - max(0, dy))
    dst_c = slice(max(0, -dx), cols - max(0, dx))
    src_r = slice(max(0, dy), rows - max(0, -dy))
    src_c = slice(max(0, dx), cols - max(0, -dx))
    shifted[dst_r, dst_c] = pixels[src_r, src_c]
    valid[dst_r, dst_c] = True
    return shifted, valid


def estimate_filter_sigma(cube: HsiCube, radius: int = 2, sample_fraction: float = 0.01, seed: int = 0) -> float:
    """
    Default spectral scale of the weighted mean filter.

    The median of center-to-neighbor spectral distances inside the filter window, taken over a
    seeded sample of ``sample_fraction`` of the pixels (at least one).
    """
    if radius < 0:
        raise ParameterError(f"filter radius must be >= 0, got {radius}")
    pixels = cube.to_pixels()
    rng = np.random.default_rng(seed)
    count = max(1, int(math.ceil(sample_fraction * cube.pixels)))
    sample = np.sort(rng.choice(cube.pixels, size=min(count, cube.pixels), replace=False))
    rows, cols = np.divmod(sample, cube.cols)
    distances = []
    for dy, dx in _window_offsets(radius):
        if dy == 0 and dx == 0:
            continue
        nr, nc = rows + dy, cols + dx
        inside = (nr >= 0) & (nr < cube.rows) & (nc >= 0) & (nc < cube.cols)
        if not inside.any():
            continue
        diff = pixels[rows[inside], cols[inside]] - pixels[nr[inside], nc[inside]]
        distances.append(np.sqrt(np.sum(diff * diff, axis=1)))
    if not distances:
        return 1e-12
    return max(float(np.median(np.concatenate(distances))), 1e-12)


def weighted_mean_filter(cube: HsiCube, radius: int = 2, sigma_f: Optional[float] = None) -> HsiCube:
    """
    Edge-preserving spectral smoothing with a (2*radius+1)^2 window.

    Each output spectrum is the convex combination of the window spectra with weights
    exp(-||x_c - x_j||^2 / (2 sigma_f^2)), normalized over the in-bounds part of the window.

    Parameters
    ----------
    cube : HsiCube
    radius : int
        Window radius, 2 gives the 5x5 window
    sigma_f : float
        Spectral scale; None estimates it with estimate_filter_sigma, math.inf gives equal weights

    Returns
    -------
        Filtered HsiCube
    """
    if radius < 0:
        raise ParameterError(f"filter radius must be >= 0, got {radius}")
    if sigma_f is None:
        sigma_f = estimate_filter_sigma(cube, radius)
        logger.info('weighted mean filter: estimated sigma_f=%.6g', sigma_f)
    if not sigma_f > 0:
        raise ParameterError(f"sigma_f must be positive, got {sigma_f}")
    if radius == 0:
        return HsiCube(cube.data.copy())

    pixels = cube.to_pixels()
    numerator = np.zeros_like(pixels)
    denominator = np.zeros(pixels.shape[:2])
    for dy, dx in _window_offsets(radius):
        neighbor, valid = _shifted(pixels, dy, dx)
        if math.isinf(sigma_f):
            weight = valid.astype(np.float64)
        else:
            diff = pixels - neighbor
            weight = np.exp(-np.sum(diff * diff, axis=2) / (2.0 * sigma_f * sigma_f)) * valid
        numerator += weight[:, :, None] * neighbor
        denominator += weight
    # the center pixel always contributes weight 1, so the denominator never vanishes
    filtered = numerator / denominator[:, :, None]
    low = pixels.min(axis=(0, 1))
    high = pixels.max(axis=(0, 1))
    return HsiCube.from_pixels(np.clip(filtered, low, high))


def add_awgn(cube: HsiCube, sigma: float, seed: int) -> HsiCube:
    """
    Add i.i.d. Gaussian noise of standard deviation ``sigma`` from a seeded generator.

    The same seed always gives bit-identical output.
    """
    if sigma < 0:
        raise ParameterError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return HsiCube(cube.data.copy())
    rng = np.random.default_rng(seed)
    return HsiCube(cube.data + rng.normal(0.0, sigma, size=cube.data.shape))


def scale_to_range(cube: HsiCube, low: float, high: float) -> HsiCube:
    """Rescale the whole cube linearly onto [low, high]; a constant cube maps to ``low``."""
    if not high > low:
        raise ParameterError(f"scale range must satisfy low < high, got [{low}, {high}]")
    data = cube.data
    span = data.max() - data.min()
    if span == 0:
        return HsiCube(np.full_like(data, low))
    return HsiCube(low + (data - data.min()) * ((high - low) / span))


def first_pc_image(cube: HsiCube) -> GuideImage:
    """
    Project every pixel on the first global principal component and min-max normalize.

    Values are rounded to GUIDE_DECIMALS decimals, so adding the same offset to every pixel
    gives back the identical image. A cube without spectral variation maps to an all-zero image.
    """
    from superpca.linalg import fit_pca, project

    matrix = reshape_cube(cube)
    basis = fit_pca(matrix, 1)
    scores = project(basis, matrix)[0]
    low, high = scores.min(), scores.max()
    scale = max(float(np.max(np.abs(matrix))), 1.0)
    if high - low <= 1e-12 * scale:
        return GuideImage(np.zeros((cube.rows, cube.cols)))
    values = np.round((scores - low) / (high - low), GUIDE_DECIMALS)
    return GuideImage(values.reshape(cube.rows, cube.cols))
