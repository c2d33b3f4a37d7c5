from __future__ import annotations

import logging
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from superpca.classify import LabelMap
from superpca.cube import HsiCube
from superpca.errors import ParameterError

logger = logging.getLogger(__name__)

# Tuned fundamental superpixel count (sf) and half-width (scales) of the public scenes.
SCENE_PRESETS: Dict[str, Dict[str, Any]] = {
    'indian_pines': {'sf': 100, 'scales': 4, 'dim': 30, 'filter_radius': 2},
    'pavia_university': {'sf': 20, 'scales': 6, 'dim': 30, 'filter_radius': 2},
    'salinas': {'sf': 100, 'scales': 4, 'dim': 30, 'filter_radius': 2},
}


def scene_preset(name: str) -> Dict[str, Any]:
    try:
        return dict(SCENE_PRESETS[name])
    except KeyError:
        raise ParameterError(f"unknown scene preset {name!r}; use one of {', '.join(sorted(SCENE_PRESETS))}")


def make_synthetic_scene(rows: int = 48, cols: int = 48, bands: int = 20, regions: int = 4, rank: int = 2,
                         noise: float = 0.05, seed: int = 0) -> Tuple[HsiCube, LabelMap]:
    """
    A piecewise scene for experiments without a public dataset.

    Regions are the Voronoi cells of ``regions`` distinct seeded pixel sites. Every region owns
    ``rank`` random non-negative spectra; a pixel mixes them with non-negative abundances whose
    first component varies most, so each region's spectra spread mainly along one direction.
    White Gaussian noise of standard deviation ``noise`` times the signal standard deviation
    is added last.

    Parameters
    ----------
    rows, cols, bands : int
    regions : int
        Number of regions, 1 <= regions <= rows * cols
    rank : int
        Spectra per region, >= 1
    noise : float
        Relative noise level, >= 0
    seed : int

    Returns
    -------
        (HsiCube, LabelMap)
            The cube and the ground truth, where region r is class r + 1
    """
    pixels = rows * cols
    if min(rows, cols, bands) < 1:
        raise ParameterError(f"scene size must be positive, got {rows}x{cols}x{bands}")
    if not 1 <= regions <= pixels:
        raise ParameterError(f"regions must satisfy 1 <= regions <= {pixels}, got {regions}")
    if rank < 1:
        raise ParameterError(f"rank must be >= 1, got {rank}")
    if noise < 0:
        raise ParameterError(f"noise level must be non-negative, got {noise}")
    rng = np.random.default_rng(seed)

    sites = rng.choice(pixels, size=regions, replace=False)
    site_rows, site_cols = np.divmod(sites, cols)
    grid_rows, grid_cols = np.divmod(np.arange(pixels), cols)
    distances = (grid_rows[:, None] - site_rows[None, :]) ** 2 + (grid_cols[:, None] - site_cols[None, :]) ** 2
    assignment = np.argmin(distances, axis=1)

    signal = np.zeros((pixels, bands))
    for region in range(regions):
        members = np.flatnonzero(assignment == region)
        spectra = rng.uniform(0.1, 1.0, size=(rank, bands))
        abundances = rng.uniform(0.0, 0.3, size=(members.shape[0], rank))
        abundances[:, 0] = rng.uniform(0.2, 1.0, size=members.shape[0])
        signal[members] = abundances @ spectra

    sigma = noise * float(signal.std())
    if sigma > 0:
        signal = signal + rng.normal(0.0, sigma, size=signal.shape)
    logger.debug('synthetic scene %dx%dx%d, %d regions, noise sigma %.4g', rows, cols, bands, regions, sigma)
    cube = HsiCube.from_pixels(signal.reshape(rows, cols, bands))
    return cube, LabelMap((assignment + 1).reshape(rows, cols))


# class ids of a 2x2 block of plots; diagonal plots hold the two closest levels
PLOT_TILE = np.array([[0, 2], [3, 1]])
PLOT_LEVELS = (1.0, 3.0, 11.0, 13.0)


def plot_spectra(bands: int, shapes: int, floor: float = 0.15) -> np.ndarray:
    """
    Unit-norm spectra sharing a flat ``floor`` with a unit peak over their own band block.

    Blocks are disjoint and ``bands // shapes`` wide, so every pair of spectra has the same
    correlation and the same projection on the flat direction.

    Returns
    -------
        (shapes, bands) array
    """
    if not 1 <= shapes <= bands:
        raise ParameterError(f"plot spectra need 1 <= shapes <= bands={bands}, got {shapes}")
    width = bands // shapes
    spectra = np.full((shapes, bands), floor)
    for shape in range(shapes):
        spectra[shape, shape * width:(shape + 1) * width] += 1.0
    return spectra / np.linalg.norm(spectra, axis=1, keepdims=True)


def make_plot_scene(plots: int = 6, plot_size: int = 8, bands: int = 20, shapes: int = 9,
                    levels: Sequence[float] = PLOT_LEVELS, texture: float = 0.15, noise: float = 0.01,
                    seed: int = 0) -> Tuple[HsiCube, LabelMap]:
    """
    A field scene of square plots with four classes laid out in repeating 2x2 blocks.

    Every plot has its own spectral shape from :func:`plot_spectra`, and each class uses the
    shapes in a seeded order, so plots of one class share brightness but not shape while
    plots of different classes may share a shape. Pixel i of a plot of class c is
    ``(levels[c] + u_i) * spectrum`` with u_i uniform in [-texture, texture]. Neighbouring
    plots never share a class. White Gaussian noise of standard deviation ``noise`` times the
    signal standard deviation is added last.

    Parameters
    ----------
    plots : int
        Plots per side, >= 2
    plot_size : int
        Plot side in pixels
    levels : sequence of 4 floats
        Brightness of classes 1 to 4
    texture : float
        Half-width of the per-pixel brightness variation, smaller than half the closest level gap
    noise : float
        Relative noise level, >= 0

    Returns
    -------
        (HsiCube, LabelMap)
            The cube and the ground truth with classes 1 to 4
    """
    levels = np.asarray(levels, dtype=np.float64)
    if levels.shape != (PLOT_TILE.size,):
        raise ParameterError(f"a plot scene needs {PLOT_TILE.size} class levels, got {levels.shape[0]}")
    if plots < 2 or plot_size < 1:
        raise ParameterError(f"plot grid must be at least 2x2 plots of >= 1 pixel, got {plots}x{plots} "
                             f"plots of {plot_size}")
    gap = np.min(np.diff(np.sort(levels)))
    if not 0 <= texture < gap / 2:
        raise ParameterError(f"texture must satisfy 0 <= texture < {gap / 2:g}, got {texture}")
    if noise < 0:
        raise ParameterError(f"noise level must be non-negative, got {noise}")
    rng = np.random.default_rng(seed)
    spectra = plot_spectra(bands, shapes)

    plot_rows, plot_cols = np.divmod(np.arange(plots * plots), plots)
    classes = PLOT_TILE[plot_rows % 2, plot_cols % 2]
    plot_shapes = np.zeros(plots * plots, dtype=np.int64)
    for label in range(PLOT_TILE.size):
        members = np.flatnonzero(classes == label)
        plot_shapes[members] = rng.permutation(members.shape[0]) % shapes

    side = plots * plot_size
    grid_rows, grid_cols = np.divmod(np.arange(side * side), side)
    plot_of_pixel = (grid_rows // plot_size) * plots + grid_cols // plot_size
    brightness = levels[classes[plot_of_pixel]] + rng.uniform(-texture, texture, size=side * side)
    signal = brightness[:, None] * spectra[plot_shapes[plot_of_pixel]]

    sigma = noise * float(signal.std())
    if sigma > 0:
        signal = signal + rng.normal(0.0, sigma, size=signal.shape)
    logger.debug('plot scene %dx%d plots of %d pixels, %d shapes, noise sigma %.4g', plots, plots, plot_size,
                 shapes, sigma)
    cube = HsiCube.from_pixels(signal.reshape(side, side, bands))
    return cube, LabelMap((classes[plot_of_pixel] + 1).reshape(side, side))
