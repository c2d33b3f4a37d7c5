from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from superpca.cube import HsiCube, cube_from_matrix, reshape_cube
from superpca.errors import ContractError, ParameterError
from superpca.linalg import covariance, eigen_ratio, fit_pca, project, sym_eigen
from superpca.segmentation import RegionMap

logger = logging.getLogger(__name__)

METHODS = ('superpca', 'global', 'square', 'cluster')
DEFAULT_DIM = 30


@dataclass(frozen=True)
class ReducedCube:
    """
    Reduced features of every pixel, in the HsiCube layout.

    Channel j of a pixel is the j-th principal component of the pixel's own region, so
    channels are not aligned across regions. Regions smaller than ``dim`` fill their trailing
    channels with zeros; ``region_dims`` records how many channels each region really uses.
    """

    cube: HsiCube
    regions: RegionMap
    dim: int
    method: str
    region_dims: np.ndarray = field(repr=False)

    @property
    def data(self) -> np.ndarray:
        return self.cube.data

    def features(self) -> np.ndarray:
        """(P, d) feature rows in flat pixel order."""
        return reshape_cube(self.cube).T


def _region_members(region_map: RegionMap):
    labels = region_map.labels.ravel()
    order = np.argsort(labels, kind='stable')
    bounds = np.concatenate([[0], np.cumsum(np.bincount(labels, minlength=region_map.count))])
    return [order[bounds[k]:bounds[k + 1]] for k in range(region_map.count)]


def _check_map(cube: HsiCube, region_map: RegionMap) -> None:
    if (region_map.rows, region_map.cols) != (cube.rows, cube.cols):
        raise ContractError(f"region map of size {region_map.rows}x{region_map.cols} does not match "
                            f"a {cube.rows}x{cube.cols} cube")


def reduce_cube(cube: HsiCube, region_map: RegionMap, d: int, method: str = 'superpca',
                keep_offset: bool = False) -> ReducedCube:
    """
    Fit and apply an independent PCA inside every region.

    Parameters
    ----------
    cube : HsiCube
    region_map : RegionMap
        Same size as the cube
    d : int
        Reduced dimension, 1 <= d <= L
    method : str
        Provenance tag: superpca, global, square or cluster
    keep_offset : bool
        Project raw spectra (W^T x) rather than centered ones, so each region's mean survives
        into the features

    Returns
    -------
        ReducedCube
    """
    _check_map(cube, region_map)
    if not 1 <= d <= cube.bands:
        raise ParameterError(f"reduced dimension must satisfy 1 <= d <= L={cube.bands}, got d={d}")
    if method not in METHODS:
        raise ParameterError(f"unknown reduction method {method!r}; use one of {', '.join(METHODS)}")
    matrix = reshape_cube(cube)
    reduced = np.zeros((d, cube.pixels))
    region_dims = np.zeros(region_map.count, dtype=np.int64)
    for region, members in enumerate(_region_members(region_map)):
        dim = min(d, members.shape[0], cube.bands)
        region_dims[region] = dim
        pixels = matrix[:, members]
        basis = fit_pca(pixels, dim)
        reduced[:dim, members] = basis.W.T @ pixels if keep_offset else project(basis, pixels)
    short = int(np.sum(region_dims < d))
    if short:
        logger.warning('%d of %d regions have fewer than %d pixels; their trailing channels are zero',
                       short, region_map.count, d)
    return ReducedCube(cube_from_matrix(reduced, cube.rows, cube.cols), region_map, d, method, region_dims)


def superpca_reduce(cube: HsiCube, region_map: RegionMap, d: int = DEFAULT_DIM,
                    keep_offset: bool = False) -> ReducedCube:
    """SuperPCA: region-wise PCA over a superpixel map."""
    return reduce_cube(cube, region_map, d, 'superpca', keep_offset)


def global_pca_reduce(cube: HsiCube, d: int = DEFAULT_DIM, keep_offset: bool = False) -> ReducedCube:
    """One PCA basis fitted on all pixels and applied everywhere."""
    return reduce_cube(cube, RegionMap.single(cube.rows, cube.cols), d, 'global', keep_offset)


@dataclass(frozen=True)
class RatioReport:
    """
    First-to-second eigenvalue ratios per region and for the whole image.

    Regions with fewer than 2 pixels or without any spectral variance are absent.
    """

    ratios: Dict[int, float]
    sizes: Dict[int, int]
    global_ratio: float

    @property
    def mean_ratio(self) -> float:
        if not self.ratios:
            return float('nan')
        return float(np.mean(list(self.ratios.values())))

    def entries(self):
        return sorted(self.ratios.items())


def _ratio(pixels: np.ndarray):
    spectrum = sym_eigen(covariance(pixels))
    if not spectrum.values[0] > 0:
        return None
    return eigen_ratio(spectrum)


def region_eigen_ratios(cube: HsiCube, region_map: RegionMap) -> RatioReport:
    """
    lambda_1 / lambda_2 of every region's covariance next to the global one.

    Parameters
    ----------
    cube : HsiCube
        At least 2 bands
    region_map : RegionMap

    Returns
    -------
        RatioReport
    """
    _check_map(cube, region_map)
    if cube.bands < 2:
        raise ParameterError(f"eigen ratios need at least 2 bands, got {cube.bands}")
    matrix = reshape_cube(cube)
    ratios, sizes = {}, {}
    for region, members in enumerate(_region_members(region_map)):
        if members.shape[0] < 2:
            continue
        value = _ratio(matrix[:, members])
        if value is not None:
            ratios[region] = value
            sizes[region] = int(members.shape[0])
    global_ratio = _ratio(matrix)
    return RatioReport(ratios, sizes, float('nan') if global_ratio is None else global_ratio)
