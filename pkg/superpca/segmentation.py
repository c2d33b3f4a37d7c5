from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.cluster.hierarchy import DisjointSet

from superpca.cube import GuideImage, HsiCube, PixelMatrix, first_pc_image, reshape_cube
from superpca.errors import ContractError, ParameterError
from superpca.utils import round_half_away

__pdoc__ = {
    'superpca.segmentation.ErsSegmenter.gain': False,
}

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-6
# smallest raw similarity kept, so every edge weight stays strictly positive
SIMILARITY_FLOOR = 1e-300
# marginal gains are compared at this many decimals; closer gains tie and go to the smaller edge index
GAIN_DECIMALS = 10


@dataclass(frozen=True)
class RegionMap:
    """
    An exhaustive labeling of the pixels into ``count`` non-empty regions 0..count-1.

    ``connected`` is True when every region is 4-connected (ERS superpixels, squares) and
    False for spectral clusters.
    """

    labels: np.ndarray
    count: int
    connected: bool

    @classmethod
    def from_labels(cls, labels: np.ndarray, connected: bool) -> RegionMap:
        """Compact arbitrary integer ids to 0..S-1 in order of first appearance (row-major)."""
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise ContractError(f"region labels must be a 2-D grid, got shape {labels.shape}")
        _, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
        rank = np.empty(first.shape[0], dtype=np.int64)
        rank[np.argsort(first, kind='stable')] = np.arange(first.shape[0])
        return cls(rank[inverse].reshape(labels.shape), int(first.shape[0]), connected)

    @classmethod
    def single(cls, rows: int, cols: int) -> RegionMap:
        return cls(np.zeros((rows, cols), dtype=np.int64), 1, True)

    @property
    def rows(self) -> int:
        return self.labels.shape[0]

    @property
    def cols(self) -> int:
        return self.labels.shape[1]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.count)


def is_four_connected(region_map: RegionMap) -> bool:
    """True when every region of the map forms a single 4-connected component."""
    structure = ndimage.generate_binary_structure(2, 1)
    for index, window in enumerate(ndimage.find_objects(region_map.labels + 1)):
        if window is None:
            continue
        _, pieces = ndimage.label(region_map.labels[window] == index, structure=structure)
        if pieces != 1:
            return False
    return True


@dataclass(frozen=True)
class SegmentationGraph:
    """
    4-neighbor lattice over the guide image.

    Edges are listed pixel by pixel in row-major order, the right neighbor before the lower
    one; ``weights`` are the similarities normalized to sum 1. Every pixel carries the same total
    mass ``vertex_weights``, the largest incident weight sum over the image; with no edge
    selected all of it sits on the pixel's self-loop, and each selected edge moves its weight off
    the self-loops of both endpoints.
    """

    rows: int
    cols: int
    edges: np.ndarray
    similarities: np.ndarray
    weights: np.ndarray
    vertex_weights: np.ndarray
    sigma: float

    @property
    def vertices(self) -> int:
        return self.rows * self.cols

    @property
    def stationary(self) -> np.ndarray:
        """Stationary distribution mu_i of the random walk."""
        return self.vertex_weights / self.vertex_weights.sum()


def lattice_edges(rows: int, cols: int) -> np.ndarray:
    index = np.arange(rows * cols).reshape(rows, cols)
    right = np.stack([index[:, :-1].ravel(), index[:, 1:].ravel()], axis=1)
    down = np.stack([index[:-1, :].ravel(), index[1:, :].ravel()], axis=1)
    edges = np.concatenate([right, down])
    key = edges[:, 0] * 2 + np.concatenate([np.zeros(len(right), int), np.ones(len(down), int)])
    return edges[np.argsort(key, kind='stable')]


def build_graph(guide: GuideImage, sigma_g: Union[float, str] = 'auto') -> SegmentationGraph:
    """
    Build the similarity graph that ERS segments.

    Parameters
    ----------
    guide : GuideImage
    sigma_g : float or 'auto'
        Gaussian scale of the intensity similarity exp(-(g_i - g_j)^2 / (2 sigma_g^2)); 'auto'
        uses the standard deviation of all neighbor differences (at least 1e-6)

    Returns
    -------
        SegmentationGraph with M(N-1) + (M-1)N edges
    """
    rows, cols = guide.values.shape
    if rows * cols < 2:
        raise ParameterError('segmentation graph needs an image with at least 2 pixels')
    values = guide.values.ravel().astype(np.float64)
    edges = lattice_edges(rows, cols)
    diffs = values[edges[:, 1]] - values[edges[:, 0]]
    if sigma_g == 'auto':
        sigma = max(float(np.std(diffs)), SIGMA_FLOOR)
    else:
        sigma = float(sigma_g)
        if not sigma > 0:
            raise ParameterError(f"sigma_g must be positive or 'auto', got {sigma_g}")
    similarities = np.maximum(np.exp(-(diffs * diffs) / (2.0 * sigma * sigma)), SIMILARITY_FLOOR)
    weights = similarities / similarities.sum()
    incident = (np.bincount(edges[:, 0], weights, minlength=rows * cols)
                + np.bincount(edges[:, 1], weights, minlength=rows * cols))
    vertex_weights = np.full(rows * cols, incident.max())
    return SegmentationGraph(rows, cols, edges, similarities, weights, vertex_weights, sigma)


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0.0 else 0.0


def _vertex_gain(loop: float, weight: float) -> float:
    return _xlogx(loop) - _xlogx(max(loop - weight, 0.0)) - _xlogx(weight)


def entropy_gain(weight: float, loop_u: float, loop_v: float, total: float) -> float:
    """Entropy-rate increase from moving ``weight`` off the self-loops of both endpoints."""
    return (_vertex_gain(loop_u, weight) + _vertex_gain(loop_v, weight)) / total


def balancing_gain(size_a: int, size_b: int, vertices: int) -> float:
    """Increase of B when components of the given sizes merge (one component fewer)."""
    pa, pb = size_a / vertices, size_b / vertices
    return _xlogx(pa) + _xlogx(pb) - _xlogx(pa + pb) + 1.0


def auto_alpha(graph: SegmentationGraph) -> float:
    """Balance weight alpha = (mean initial entropy gain) / (mean initial balancing gain)."""
    total = float(graph.vertex_weights.sum())
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    gains = [entropy_gain(w, lu, lv, total) for w, lu, lv
             in zip(graph.weights.tolist(), graph.vertex_weights[u].tolist(), graph.vertex_weights[v].tolist())]
    return float(np.mean(gains)) / balancing_gain(1, 1, graph.vertices)


def entropy_rate(graph: SegmentationGraph, selected) -> float:
    """Entropy rate H(A) of the random walk that keeps unselected edge mass on self-loops."""
    selected = np.asarray(list(selected), dtype=np.int64)
    total = float(graph.vertex_weights.sum())
    loops = graph.vertex_weights.copy()
    value = 0.0
    for e in selected.tolist():
        u, v = graph.edges[e]
        w = float(graph.weights[e])
        loops[u] -= w
        loops[v] -= w
        value -= 2.0 * _xlogx(w)
    for loop, full in zip(loops.tolist(), graph.vertex_weights.tolist()):
        value += _xlogx(full) - _xlogx(max(loop, 0.0))
    return value / total


def balancing_term(labels: np.ndarray) -> float:
    """B(A): entropy of the region-size distribution minus the number of regions."""
    sizes = np.bincount(np.unique(np.asarray(labels).ravel(), return_inverse=True)[1])
    fractions = sizes / sizes.sum()
    return -sum(_xlogx(p) for p in fractions.tolist()) - len(sizes)


def components_of(graph: SegmentationGraph, selected) -> np.ndarray:
    """Label grid of the connected components spanned by the selected edges."""
    sets = DisjointSet(range(graph.vertices))
    for e in selected:
        u, v = graph.edges[e]
        sets.merge(int(u), int(v))
    roots = np.array([sets[i] for i in range(graph.vertices)])
    return RegionMap.from_labels(roots.reshape(graph.rows, graph.cols), connected=True).labels


def ers_objective(graph: SegmentationGraph, selected, alpha: float) -> float:
    """H(A) + alpha B(A) for an edge subset A."""
    selected = list(selected)
    return entropy_rate(graph, selected) + alpha * balancing_term(components_of(graph, selected))


class ErsSegmenter:
    """
    Entropy rate superpixel segmentation by lazy greedy edge selection.

    Starting from every pixel on its own, the edge with the largest marginal gain of
    H(A) + alpha B(A) that joins two different components is added until the requested number
    of components remains. Stored gains only decrease as A grows, so a popped edge whose
    refreshed gain still beats the best stored gain is the true maximizer. Ties go to the
    smallest edge index. Edges inside a component never lower the objective, so once the
    count is reached every remaining edge within a region is added as well; ``history``
    lists the merges and ``selected`` the final edge set A.

    Examples
    --------
    >>> graph = build_graph(first_pc_image(cube))
    >>> segmenter = ErsSegmenter(graph)
    >>> region_map = segmenter.segment(100)
    >>> segmenter.history[:3]

    Parameters
    ----------
        graph : SegmentationGraph
        alpha : float or 'auto'
            Weight of the balancing term, 'auto' uses auto_alpha
    """

    def __init__(self, graph: SegmentationGraph, alpha: Union[float, str] = 'auto') -> None:
        self.graph = graph
        if alpha == 'auto':
            alpha = auto_alpha(graph)
        elif not float(alpha) > 0:
            raise ParameterError(f"ERS alpha must be positive or 'auto', got {alpha}")
        self.alpha = float(alpha)
        self.history: List[Tuple[int, float]] = []
        self.selected: List[int] = []
        self.total = float(graph.vertex_weights.sum())
        self._u = graph.edges[:, 0].tolist()
        self._v = graph.edges[:, 1].tolist()
        self._w = graph.weights.tolist()

    def gain(self, edge: int, loops: list, sets: DisjointSet) -> float:
        u, v, w = self._u[edge], self._v[edge], self._w[edge]
        value = (entropy_gain(w, loops[u], loops[v], self.total)
                 + self.alpha * balancing_gain(sets.subset_size(u), sets.subset_size(v), self.graph.vertices))
        return round(value, GAIN_DECIMALS)

    def segment(self, superpixels: int) -> RegionMap:
        """
        Segment into exactly ``superpixels`` 4-connected regions.

        Parameters
        ----------
        superpixels : int
            Number of regions S, 1 <= S <= number of pixels

        Returns
        -------
            RegionMap with count == superpixels
        """
        vertices = self.graph.vertices
        if not 1 <= superpixels <= vertices:
            raise ParameterError(f"superpixel count must satisfy 1 <= S <= {vertices}, got {superpixels}")
        loops = self.graph.vertex_weights.tolist()
        sets = DisjointSet(range(vertices))
        self.history = []
        heap = [(-self.gain(e, loops, sets), e) for e in range(len(self._w))]
        heapq.heapify(heap)
        components = vertices
        while components > superpixels and heap:
            _, edge = heapq.heappop(heap)
            u, v = self._u[edge], self._v[edge]
            if sets.connected(u, v):
                continue
            fresh = self.gain(edge, loops, sets)
            if heap and (-fresh, edge) > heap[0]:
                heapq.heappush(heap, (-fresh, edge))
                continue
            sets.merge(u, v)
            loops[u] -= self._w[edge]
            loops[v] -= self._w[edge]
            components -= 1
            self.history.append((edge, fresh))
        self.selected = [e for e in range(len(self._w)) if sets.connected(self._u[e], self._v[e])]
        roots = np.array([sets[i] for i in range(vertices)]).reshape(self.graph.rows, self.graph.cols)
        logger.debug('ERS: %d regions after %d merges, %d edges selected', components, len(self.history),
                     len(self.selected))
        return RegionMap.from_labels(roots, connected=True)


def ers_segment(graph: SegmentationGraph, superpixels: int, alpha: Union[float, str] = 'auto') -> RegionMap:
    """Entropy rate superpixels; see ErsSegmenter."""
    return ErsSegmenter(graph, alpha).segment(superpixels)


def square_partition(rows: int, cols: int, superpixels: int) -> RegionMap:
    """
    Tile the image with axis-aligned rectangular blocks.

    Rows split into r = round(sqrt(S rows / cols)) bands and columns into ceil(S / r) bands,
    both clamped to the image size; the map reports the actual block count r * c.
    """
    if not 1 <= superpixels <= rows * cols:
        raise ParameterError(f"square count must satisfy 1 <= S <= {rows * cols}, got {superpixels}")
    row_bands = min(max(1, round_half_away(math.sqrt(superpixels * rows / cols))), rows)
    col_bands = min(max(1, int(math.ceil(superpixels / row_bands))), cols)
    row_id = (np.arange(rows) * row_bands) // rows
    col_id = (np.arange(cols) * col_bands) // cols
    labels = row_id[:, None] * col_bands + col_id[None, :]
    return RegionMap(labels.astype(np.int64), row_bands * col_bands, True)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (np.sum(points * points, axis=1)[:, None] - 2.0 * points @ centers.T
          + np.sum(centers * centers, axis=1)[None, :])
    return np.maximum(d2, 0.0)


def _kmeans_plus_plus(points: np.ndarray, clusters: int, rng: np.random.Generator) -> np.ndarray:
    count = points.shape[0]
    chosen = [int(rng.integers(count))]
    closest = _squared_distances(points, points[chosen])[:, 0]
    for _ in range(1, clusters):
        total = closest.sum()
        if total > 0:
            pick = int(rng.choice(count, p=closest / total))
        else:
            remaining = np.setdiff1d(np.arange(count), chosen)
            pick = int(rng.choice(remaining))
        chosen.append(pick)
        closest = np.minimum(closest, _squared_distances(points, points[[pick]])[:, 0])
    return points[chosen].copy()


def kmeans_cluster(matrix: PixelMatrix, clusters: int, seed: int = 0, max_iter: int = 100,
                   rows: int = None, cols: int = None) -> RegionMap:
    """
    Spectral k-means (Lloyd iterations from a seeded k-means++ start).

    Stops after ``max_iter`` iterations or when no assignment changes; an empty cluster is
    re-seeded with the point farthest from its centroid. Clusters are not spatially connected.

    Parameters
    ----------
    matrix : PixelMatrix
        (L, P) pixel matrix
    clusters : int
        K, 1 <= K <= P
    rows, cols : int
        Image shape of the returned map; defaults to a single row

    Returns
    -------
        RegionMap with connected False
    """
    points = np.asarray(matrix, dtype=np.float64).T
    count = points.shape[0]
    if not 1 <= clusters <= count:
        raise ParameterError(f"cluster count must satisfy 1 <= K <= P={count}, got {clusters}")
    if max_iter < 1:
        raise ParameterError(f"k-means needs max_iter >= 1, got {max_iter}")
    rows, cols = (1, count) if rows is None else (rows, cols)
    if rows * cols != count:
        raise ContractError(f"{count} pixels do not fill a {rows}x{cols} map")
    rng = np.random.default_rng(seed)
    centers = _kmeans_plus_plus(points, clusters, rng)
    assignment = None
    for iteration in range(max_iter):
        distances = _squared_distances(points, centers)
        new_assignment = np.argmin(distances, axis=1)
        sizes = np.bincount(new_assignment, minlength=clusters)
        for empty in np.flatnonzero(sizes == 0).tolist():
            own = distances[np.arange(count), new_assignment]
            farthest = int(np.argmax(own))
            sizes[new_assignment[farthest]] -= 1
            new_assignment[farthest] = empty
            sizes[empty] = 1
            distances[farthest] = 0.0
        if assignment is not None and np.array_equal(assignment, new_assignment):
            break
        assignment = new_assignment
        for k in range(clusters):
            centers[k] = points[assignment == k].mean(axis=0)
    logger.debug('k-means: %d clusters after %d iterations', clusters, iteration + 1)
    return RegionMap.from_labels(assignment.reshape(rows, cols), connected=False)


def partition_cube(cube: HsiCube, method: str, superpixels: int, **options) -> RegionMap:
    """
    Region map for a reduction method.

    Parameters
    ----------
    cube : HsiCube
    method : str
        'superpca' (ERS on the guide image), 'square', 'cluster' (k-means) or 'global'
    superpixels : int
        Region count S (K for clustering)
    options :
        guide : GuideImage, reuse a precomputed guide image
        alpha, sigma_g : ERS parameters
        seed, max_iter : k-means parameters
    """
    if method == 'global':
        return RegionMap.single(cube.rows, cube.cols)
    if method == 'square':
        return square_partition(cube.rows, cube.cols, superpixels)
    if method == 'cluster':
        return kmeans_cluster(reshape_cube(cube), superpixels, options.get('seed', 0),
                              options.get('max_iter', 100), cube.rows, cube.cols)
    if method == 'superpca':
        guide = options.get('guide') or first_pc_image(cube)
        graph = build_graph(guide, options.get('sigma_g', 'auto'))
        return ers_segment(graph, superpixels, options.get('alpha', 'auto'))
    raise ParameterError(f"unknown reduction method {method!r}; use superpca, global, square or cluster")
