from __future__ import annotations

import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from reactivex import Observable
from reactivex import operators as op
from reactivex.subject import Subject

from superpca.cache import Cache
from superpca.cube import GuideImage, HsiCube, first_pc_image
from superpca.errors import ContractError, ParameterError, ScaleTaskError
from superpca.reduction import DEFAULT_DIM, ReducedCube, superpca_reduce
from superpca.segmentation import RegionMap, SegmentationGraph, build_graph, ers_segment
from superpca.utils import cube_fingerprint, resolve_workers, round_half_away

__pdoc__ = {
    'superpca.multiscale.MultiscaleRunner.run_scale': False,
    'superpca.multiscale.MultiscaleRunner.graph': False,
}

logger = logging.getLogger(__name__)

_runner_options = ('d', 'alpha', 'sigma_g', 'workers', 'cache', 'keep_offset', 'guide')


@dataclass(frozen=True)
class ScaleSchedule:
    """
    Superpixel counts S_c = min(max(1, round(sqrt(2)^c S_f)), P) for c = -C..C.
    """

    fundamental: int
    half_width: int
    pixels: int
    counts: Tuple[int, ...]

    @property
    def exponents(self) -> List[int]:
        return list(range(-self.half_width, self.half_width + 1))

    def items(self):
        return list(zip(self.exponents, self.counts))


def scale_schedule(fundamental: int, half_width: int, pixels: int) -> ScaleSchedule:
    """
    The 2C+1 superpixel counts around a fundamental count.

    Parameters
    ----------
    fundamental : int
        S_f >= 1
    half_width : int
        C >= 0
    pixels : int
        P >= 1, the upper clamp

    Returns
    -------
        ScaleSchedule
    """
    if fundamental < 1 or half_width < 0 or pixels < 1:
        raise ParameterError(f"schedule needs S_f >= 1, C >= 0 and P >= 1, got S_f={fundamental}, "
                             f"C={half_width}, P={pixels}")
    counts = tuple(
        min(max(1, round_half_away(math.sqrt(2.0) ** c * fundamental)), pixels)
        for c in range(-half_width, half_width + 1)
    )
    return ScaleSchedule(fundamental, half_width, pixels, counts)


@dataclass
class ScaleEnsemble:
    """
    Per-scale artifacts of a multiscale run; ``predictions`` is filled by classification.
    """

    schedule: ScaleSchedule
    region_maps: List[RegionMap]
    reduced: List[ReducedCube]
    predictions: List[Any] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.reduced)


class MultiscaleRunner:
    """
    Runs ERS segmentation and SuperPCA at every scale of a schedule.

    The guide image and its similarity graph are computed once and shared; the scales run
    concurrently on a thread pool capped by SUPERPCA_THREADS.

    Examples
    --------
    >>> runner = MultiscaleRunner(cube, scale_schedule(100, 4, cube.pixels), d=30)
    >>> runner.events.subscribe(lambda event: print(event['name']))
    >>> ensemble = await runner.run()

    Parameters
    ----------
        cube : HsiCube
        schedule : ScaleSchedule
            Its pixel total must equal the cube's
        options : dict with following keys
            d : int
                Reduced dimension, default 30
            alpha : float or 'auto'
                ERS balancing weight
            sigma_g : float or 'auto'
                Similarity scale of the segmentation graph
            workers : int
                Thread cap, default from SUPERPCA_THREADS
            cache : Cache
                Shared cache for region maps and reduced cubes
            keep_offset : bool
                Keep region means in the features
            guide : GuideImage
                Precomputed guide image

    Properties
    ----------
    events : Subject
        Emits {'name': ...} dictionaries: schedule, scale_started, scale_finished, scale_failed
    """

    def __init__(self, cube: HsiCube, schedule: ScaleSchedule, **options: Any) -> None:
        unknown = set(options) - set(_runner_options)
        if unknown:
            raise ParameterError(f"unknown multiscale options: {', '.join(sorted(unknown))}")
        if schedule.pixels != cube.pixels:
            raise ContractError(f"schedule built for {schedule.pixels} pixels, cube has {cube.pixels}")
        self.cube = cube
        self.schedule = schedule
        self.d = options.get('d', DEFAULT_DIM)
        self.alpha = options.get('alpha', 'auto')
        self.sigma_g = options.get('sigma_g', 'auto')
        self.workers = options.get('workers')
        self.keep_offset = options.get('keep_offset', False)
        self.cache: Cache = options.get('cache') or Cache()
        self._guide: Optional[GuideImage] = options.get('guide')
        self._graph: Optional[SegmentationGraph] = None
        self._fingerprint = cube_fingerprint(cube)
        self.events: Subject = Subject()

    @property
    def guide(self) -> GuideImage:
        if self._guide is None:
            self._guide = first_pc_image(self.cube)
        return self._guide

    @property
    def graph(self) -> SegmentationGraph:
        if self._graph is None:
            self._graph = build_graph(self.guide, self.sigma_g)
        return self._graph

    def monitor(self) -> Observable:
        """Observable of the runner events, shared between subscribers."""
        return self.events.pipe(op.share())

    def _request(self, kind: str, superpixels: int, **extra) -> Dict[str, Any]:
        request = {'kind': kind, 'cube': self._fingerprint, 'superpixels': superpixels,
                   'alpha': self.alpha, 'sigma_g': self.sigma_g}
        request.update(extra)
        return request

    def run_scale(self, superpixels: int) -> Tuple[RegionMap, ReducedCube]:
        """Segment and reduce at one superpixel count, through the cache."""
        region_map = self.cache.fetch(
            self._request('ers', superpixels),
            lambda request: ers_segment(self.graph, superpixels, self.alpha),
        )
        reduced = self.cache.fetch(
            self._request('reduce', superpixels, d=self.d, keep_offset=self.keep_offset),
            lambda request: superpca_reduce(self.cube, region_map, self.d, self.keep_offset),
        )
        return region_map, reduced

    async def _scale_task(self, pool: ThreadPoolExecutor, exponent: int, superpixels: int):
        loop = asyncio.get_running_loop()
        self.events.on_next({'name': 'scale_started', 'scale': exponent, 'superpixels': superpixels})
        try:
            result = await loop.run_in_executor(pool, self.run_scale, superpixels)
        except Exception as err:
            self.events.on_next({'name': 'scale_failed', 'scale': exponent, 'superpixels': superpixels,
                                 'error': err})
            raise ScaleTaskError(err, f"scale c={exponent:+d} (S={superpixels})")
        self.events.on_next({'name': 'scale_finished', 'scale': exponent, 'superpixels': superpixels})
        return result

    async def run(self) -> ScaleEnsemble:
        """
        Run every scale of the schedule.

        Returns
        -------
        ScaleEnsemble
            Region maps and reduced cubes in schedule order
        """
        logger.info('superpixel schedule: %s', list(self.schedule.counts))
        self.events.on_next({'name': 'schedule', 'counts': list(self.schedule.counts)})
        # build the shared graph before fanning out so worker threads only read it
        graph = self.graph
        logger.debug("segmentation graph: %d edges, sigma_g=%.6g", len(graph.weights), graph.sigma)
        with ThreadPoolExecutor(max_workers=resolve_workers(self.workers)) as pool:
            results = await asyncio.gather(
                *[self._scale_task(pool, c, s) for c, s in self.schedule.items()],
                return_exceptions=True,
            )
        for result in results:
            if isinstance(result, BaseException):
                raise result
        return ScaleEnsemble(self.schedule, [r[0] for r in results], [r[1] for r in results])


def run_multiscale(cube: HsiCube, schedule: ScaleSchedule, d: int = DEFAULT_DIM, alpha='auto',
                   **options: Any) -> ScaleEnsemble:
    """Synchronous wrapper around MultiscaleRunner.run."""
    runner = MultiscaleRunner(cube, schedule, d=d, alpha=alpha, **options)
    return asyncio.run(runner.run())
