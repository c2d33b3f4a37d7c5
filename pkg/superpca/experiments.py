from __future__ import annotations

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd
from reactivex.subject import Subject

from superpca.cache import Cache
from superpca.classify import LabelMap, classify_features, fuse_label_maps, split_samples
from superpca.cube import HsiCube, add_awgn, first_pc_image, scale_to_range, weighted_mean_filter
from superpca.errors import ContractError, ParameterError
from superpca.metrics import AccuracyReport, summarize
from superpca.multiscale import MultiscaleRunner, ScaleEnsemble, ScaleSchedule, scale_schedule
from superpca.reduction import DEFAULT_DIM, reduce_cube
from superpca.segmentation import partition_cube
from superpca.utils import resolve_workers

__pdoc__ = {
    'superpca.experiments.Pipeline.prepare': False,
}

logger = logging.getLogger(__name__)

DEFAULT_SF_VALUES = (1, 3, 5, 10, 20, 30, 40, 50, 75, 100, 150, 200, 300)
DEFAULT_SCALE_VALUES = tuple(range(7))
ABLATION_METHODS = ('global', 'cluster', 'square', 'superpca')

_pipeline_defaults: Dict[str, Any] = {
    'sf': 100,
    'scales': 4,
    'dim': DEFAULT_DIM,
    'train': 30,
    'seed': 0,
    'classifier': 'nn',
    'repeats': 10,
    'filter_radius': 2,
    'sigma_f': None,
    'noise': 0.0,
    'scale_range': None,
    'alpha': 'auto',
    'sigma_g': 'auto',
    'keep_offset': False,
    'workers': None,
    'cache': None,
    'guide': None,
    'reg': 10.0,
    'epochs': 200,
}


def _pipeline_options(options: Dict[str, Any]) -> Dict[str, Any]:
    unknown = set(options) - set(_pipeline_defaults)
    if unknown:
        raise ParameterError(f"unknown pipeline options: {', '.join(sorted(unknown))}")
    merged = dict(_pipeline_defaults)
    merged.update({key: value for key, value in options.items() if value is not None})
    if merged['repeats'] < 1:
        raise ParameterError(f"repeats must be >= 1, got {merged['repeats']}")
    if merged['noise'] < 0:
        raise ParameterError(f"noise sigma must be non-negative, got {merged['noise']}")
    if merged['filter_radius'] < 0:
        raise ParameterError(f"filter radius must be non-negative, got {merged['filter_radius']}")
    if merged['scale_range'] is not None:
        low, high = merged['scale_range']
        if not high > low:
            raise ParameterError(f"scale range must satisfy low < high, got [{low}, {high}]")
        merged['scale_range'] = (float(low), float(high))
    return merged


def _check_scene(cube: HsiCube, gt: LabelMap) -> None:
    if (gt.rows, gt.cols) != (cube.rows, cube.cols):
        raise ContractError(f"ground truth of size {gt.rows}x{gt.cols} does not match a "
                            f"{cube.rows}x{cube.cols} cube")


def _mean_std(values: Sequence[float]):
    values = np.asarray(values, dtype=np.float64)
    return float(values.mean()), float(values.std())


@dataclass
class PipelineResult:
    """
    Scores of a multiscale run over R seeded repeats.

    ``scale_scores[r][j]`` scores scale j of repeat r, ``fused_scores[r]`` the fused prediction.
    """

    schedule: ScaleSchedule
    scale_scores: List[List[AccuracyReport]] = field(default_factory=list)
    fused_scores: List[AccuracyReport] = field(default_factory=list)
    fused_predictions: List[np.ndarray] = field(default_factory=list)

    @property
    def repeats(self) -> int:
        return len(self.fused_scores)

    def _row(self, name: str, superpixels, reports: List[AccuracyReport]) -> Dict[str, Any]:
        row = {'scale': name, 'superpixels': superpixels}
        for metric in ('oa', 'aa', 'kappa'):
            mean, std = _mean_std([getattr(report, metric) for report in reports])
            row[f"{metric}_mean"] = mean
            row[f"{metric}_std"] = std
        return row

    def table(self) -> pd.DataFrame:
        """One row per scale plus a 'fused' row, mean and std of OA, AA and Kappa over the repeats."""
        rows = [
            self._row(f"c={exponent:+d}", superpixels, [scores[j] for scores in self.scale_scores])
            for j, (exponent, superpixels) in enumerate(self.schedule.items())
        ]
        rows.append(self._row('fused', 0, self.fused_scores))
        return pd.DataFrame(rows)

    def recall_table(self) -> pd.DataFrame:
        """Mean per-class recall of the fused prediction."""
        frame = pd.DataFrame([report.recalls for report in self.fused_scores])
        summary = pd.DataFrame({'class': frame.columns.astype(int), 'recall_mean': frame.mean().to_numpy(),
                                'recall_std': frame.std(ddof=0).to_numpy()})
        return summary.sort_values('class').reset_index(drop=True)


class Pipeline:
    """
    Multiscale SuperPCA classification of one scene, end to end.

    AWGN (optional) and the weighted mean filter prepare the cube, then ERS + SuperPCA run at
    every scale of the schedule, and each of R repeats draws a split, classifies every scale
    and fuses the per-scale labels by majority vote. Repeat r uses seed ``seed + r``.

    Examples
    --------
    >>> result = Pipeline(sf=100, scales=4, dim=30, train=30, repeats=10).run(cube, gt)
    >>> print(result.table())

    Parameters
    ----------
        options : dict with following keys
            sf : int
                Fundamental superpixel count, default 100
            scales : int
                Half-width C of the schedule, default 4
            dim : int
                Reduced dimension, default 30
            train : int
                Training samples per class, default 30
            seed : int
                Base seed of splits, noise and classifiers
            classifier : str
                'nn' (default) or 'linear'
            repeats : int
                Number of repeats R, default 10
            filter_radius : int
                Weighted mean filter radius, 0 disables the filter
            sigma_f : float
                Filter similarity scale, None to estimate it
            noise : float
                AWGN standard deviation added before filtering
            scale_range : (float, float)
                Rescale the cube onto [low, high] before the noise, None keeps the input values
            alpha, sigma_g, keep_offset, workers, cache, guide :
                Passed to MultiscaleRunner
            reg, epochs :
                Linear classifier settings

    Properties
    ----------
    events : Subject
        Runner events plus {'name': 'repeat_finished', 'repeat': r, 'oa': ...}
    """

    def __init__(self, **options: Any) -> None:
        self.options = _pipeline_options(options)
        self.cache: Cache = self.options['cache'] or Cache()
        self.events: Subject = Subject()

    def prepare(self, cube: HsiCube) -> HsiCube:
        options = self.options
        if options['scale_range'] is not None:
            cube = scale_to_range(cube, *options['scale_range'])
        if options['noise'] > 0:
            cube = add_awgn(cube, options['noise'], options['seed'])
        if options['filter_radius'] > 0:
            cube = weighted_mean_filter(cube, options['filter_radius'], options['sigma_f'])
        return cube

    def _runner(self, cube: HsiCube) -> MultiscaleRunner:
        options = self.options
        schedule = scale_schedule(options['sf'], options['scales'], cube.pixels)
        runner_options = {'d': options['dim'], 'alpha': options['alpha'], 'sigma_g': options['sigma_g'],
                          'workers': options['workers'], 'cache': self.cache,
                          'keep_offset': options['keep_offset']}
        if options['guide'] is not None:
            runner_options['guide'] = options['guide']
        runner = MultiscaleRunner(cube, schedule, **runner_options)
        runner.events.subscribe(self.events.on_next)
        return runner

    def classify_ensemble(self, ensemble: ScaleEnsemble, gt: LabelMap) -> PipelineResult:
        """Run the R repeats of split, per-scale classification and fusion on reduced features."""
        options = self.options
        truth = gt.flat()
        features = [reduced.features() for reduced in ensemble.reduced]
        result = PipelineResult(ensemble.schedule)
        with ThreadPoolExecutor(max_workers=resolve_workers(options['workers'])) as pool:
            for repeat in range(options['repeats']):
                seed = options['seed'] + repeat
                split = split_samples(gt, options['train'], seed)
                if split.train.shape[0] == 0 or split.test.shape[0] == 0:
                    raise ParameterError('the split left no training or no test pixels')
                train_labels, test_labels = truth[split.train], truth[split.test]

                def classify(feats):
                    return classify_features(options['classifier'], feats[split.train], train_labels,
                                             feats[split.test], seed, reg=options['reg'], epochs=options['epochs'])

                predictions = list(pool.map(classify, features))
                fused = fuse_label_maps(predictions)
                labels = np.unique(test_labels)
                result.scale_scores.append([summarize(test_labels, p, labels) for p in predictions])
                result.fused_scores.append(summarize(test_labels, fused, labels))
                result.fused_predictions.append(fused)
                logger.info('repeat %d: fused OA %.4f', repeat + 1, result.fused_scores[-1].oa)
                self.events.on_next({'name': 'repeat_finished', 'repeat': repeat,
                                     'oa': result.fused_scores[-1].oa})
        ensemble.predictions = result.fused_predictions
        return result

    async def run_async(self, cube: HsiCube, gt: LabelMap) -> PipelineResult:
        _check_scene(cube, gt)
        runner = self._runner(self.prepare(cube))
        ensemble = await runner.run()
        return self.classify_ensemble(ensemble, gt)

    def run(self, cube: HsiCube, gt: LabelMap) -> PipelineResult:
        """
        Run the pipeline on a scene.

        Parameters
        ----------
        cube : HsiCube
        gt : LabelMap
            Ground truth of the same size

        Returns
        -------
            PipelineResult
        """
        return asyncio.run(self.run_async(cube, gt))


def _repeat_scores(features: np.ndarray, gt: LabelMap, train: int, options: Dict[str, Any]) -> List[AccuracyReport]:
    truth = gt.flat()
    reports = []
    for repeat in range(options['repeats']):
        seed = options['seed'] + repeat
        split = split_samples(gt, train, seed)
        predicted = classify_features(options['classifier'], features[split.train], truth[split.train],
                                      features[split.test], seed, reg=options['reg'], epochs=options['epochs'])
        reports.append(summarize(truth[split.test], predicted, np.unique(truth[split.test])))
    return reports


def run_ablation(cube: HsiCube, gt: LabelMap, train_sizes: Sequence[int] = (5, 10, 20, 30),
                 noise_levels: Sequence[float] = (0.0,), **options: Any) -> pd.DataFrame:
    """
    Compare the divide-and-conquer strategies at one region count.

    For every noise level the cube is rescaled onto ``scale_range`` (when set), noised and
    filtered once, so sigma is measured in the units of that range. Then global PCA, k-means
    regions (K = sf), square patches (S = sf) and ERS superpixels (S = sf) are reduced to
    ``dim`` channels and classified over the repeats for every training size.

    Returns
    -------
    pandas.DataFrame
        Columns noise, train, method, regions, oa_mean, oa_std, aa_mean, kappa_mean
    """
    settings = _pipeline_options(options)
    _check_scene(cube, gt)
    superpixels = min(settings['sf'], cube.pixels)
    rows = []
    for noise in noise_levels:
        prepared = Pipeline(**{**options, 'noise': noise}).prepare(cube)
        guide = first_pc_image(prepared)
        for method in ABLATION_METHODS:
            region_map = partition_cube(prepared, method, superpixels, guide=guide, sigma_g=settings['sigma_g'],
                                        alpha=settings['alpha'], seed=settings['seed'])
            features = reduce_cube(prepared, region_map, settings['dim'], method, settings['keep_offset']).features()
            for train in train_sizes:
                reports = _repeat_scores(features, gt, train, settings)
                oa_mean, oa_std = _mean_std([report.oa for report in reports])
                rows.append({'noise': float(noise), 'train': int(train), 'method': method,
                             'regions': region_map.count, 'oa_mean': oa_mean, 'oa_std': oa_std,
                             'aa_mean': _mean_std([report.aa for report in reports])[0],
                             'kappa_mean': _mean_std([report.kappa for report in reports])[0]})
                logger.info('ablation noise=%g T=%d %s: OA %.4f', noise, train, method, oa_mean)
    return pd.DataFrame(rows)


def run_sweep(cube: HsiCube, gt: LabelMap, sf_values: Sequence[int] = DEFAULT_SF_VALUES,
              scale_values: Sequence[int] = DEFAULT_SCALE_VALUES, **options: Any) -> pd.DataFrame:
    """
    OA as a function of the fundamental superpixel count and of the number of scales.

    The first block runs single-scale SuperPCA for every value in ``sf_values``; the second
    runs the fused multiscale pipeline at the configured ``sf`` for every C in ``scale_values``.
    Both blocks share one prepared cube, guide image and cache.

    Returns
    -------
    pandas.DataFrame
        Columns sweep ('sf' or 'scales'), value, oa_mean, oa_std, aa_mean, kappa_mean
    """
    settings = _pipeline_options(options)
    _check_scene(cube, gt)
    prepared = Pipeline(**options).prepare(cube)
    shared = {**options, 'filter_radius': 0, 'noise': 0.0, 'scale_range': None,
              'guide': settings['guide'] or first_pc_image(prepared),
              'cache': settings['cache'] or Cache()}
    rows = []

    def add_row(sweep: str, value: int, reports: List[AccuracyReport]) -> None:
        oa_mean, oa_std = _mean_std([report.oa for report in reports])
        rows.append({'sweep': sweep, 'value': int(value), 'oa_mean': oa_mean, 'oa_std': oa_std,
                     'aa_mean': _mean_std([report.aa for report in reports])[0],
                     'kappa_mean': _mean_std([report.kappa for report in reports])[0]})
        logger.info('sweep %s=%d: OA %.4f', sweep, value, oa_mean)

    for sf in sf_values:
        result = Pipeline(**{**shared, 'sf': sf, 'scales': 0}).run(prepared, gt)
        add_row('sf', sf, result.fused_scores)
    for scales in scale_values:
        result = Pipeline(**{**shared, 'scales': scales}).run(prepared, gt)
        add_row('scales', scales, result.fused_scores)
    return pd.DataFrame(rows)

