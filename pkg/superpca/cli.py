"""
Command-line interface: ``superpca <command> --flag value ...``.

Exit codes are 0 on success, 2 for invalid arguments or parameter ranges (usage is printed)
and 1 for runtime failures such as missing files or mismatched inputs.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from superpca.classify import LabelMap, classify_features, fuse_label_maps, split_samples
from superpca.cube import HsiCube, add_awgn, weighted_mean_filter
from superpca.errors import ContractError, FormatError, PaletteError, ParameterError, ParseError, ScaleTaskError
from superpca.experiments import DEFAULT_SCALE_VALUES, DEFAULT_SF_VALUES, Pipeline, run_ablation, run_sweep
from superpca.io import (format_table, load_array, read_hsif, read_labels, render_map, write_hsif, write_labels,
                         write_table_csv)
from superpca.metrics import summarize
from superpca.multiscale import run_multiscale, scale_schedule
from superpca.reduction import METHODS, reduce_cube, region_eigen_ratios
from superpca.scenes import SCENE_PRESETS, make_plot_scene, make_synthetic_scene, scene_preset
from superpca.segmentation import RegionMap, partition_cube

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(message)s'
FALLBACK_SETTINGS = {'sf': 100, 'scales': 4, 'dim': 30, 'filter_radius': 2}
_runtime_errors = (ContractError, FormatError, ParseError, PaletteError, ScaleTaskError, OSError)


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return value


def non_negative_float(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a real >= 0, got {text}")
    return value


def auto_or_float(text: str):
    if text == 'auto':
        return text
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive real, got {text}")
    return value


def load_cube(path: str, key: Optional[str] = None) -> HsiCube:
    if Path(path).suffix.lower() == '.hsif':
        return read_hsif(path)
    array = load_array(path, key)
    if array.ndim != 3:
        raise FormatError(f"{path} holds a {array.ndim}-D array, expected rows x cols x bands")
    return HsiCube.from_pixels(array)


def load_label_map(path: str, key: Optional[str] = None) -> LabelMap:
    if Path(path).suffix.lower() in ('.npy', '.mat'):
        array = load_array(path, key)
        if array.ndim != 2:
            raise FormatError(f"{path} holds a {array.ndim}-D array, expected rows x cols labels")
        return LabelMap(np.asarray(array, dtype=np.int64))
    return read_labels(path)


def load_regions(path: str) -> RegionMap:
    # region files store region k as label k + 1
    labels = read_labels(path).labels
    if labels.min() < 1:
        raise ParseError(f"{path}: region files label every pixel with an id >= 1")
    return RegionMap.from_labels(labels - 1, connected=False)


def check_size(cube: HsiCube, grid: LabelMap, name: str) -> None:
    if (grid.rows, grid.cols) != (cube.rows, cube.cols):
        raise ContractError(f"{name} is {grid.rows}x{grid.cols} but the cube is {cube.rows}x{cube.cols}")


def emit_table(frame: pd.DataFrame, csv: Optional[str]) -> None:
    print(format_table(frame))
    if csv:
        write_table_csv(frame, csv)


def apply_scene(args: argparse.Namespace) -> None:
    preset = scene_preset(args.scene) if getattr(args, 'scene', None) else FALLBACK_SETTINGS
    for key in FALLBACK_SETTINGS:
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, preset[key])


def _scale_range(args: argparse.Namespace):
    return tuple(args.scale_range) if args.scale_range else None


def cmd_convert(args: argparse.Namespace) -> None:
    array = load_array(args.input, args.key)
    if array.ndim == 3:
        write_hsif(HsiCube.from_pixels(array), args.output)
    elif array.ndim == 2:
        write_labels(LabelMap(np.asarray(array, dtype=np.int64)), args.output)
    else:
        raise FormatError(f"{args.input} holds a {array.ndim}-D array; expected a cube or a label grid")


def cmd_filter(args: argparse.Namespace) -> None:
    sigma = math.inf if args.equal_weights else args.sigma
    write_hsif(weighted_mean_filter(load_cube(args.input), args.radius, sigma), args.output)


def cmd_noise(args: argparse.Namespace) -> None:
    write_hsif(add_awgn(load_cube(args.input), args.sigma, args.seed), args.output)


def cmd_segment(args: argparse.Namespace) -> None:
    cube = load_cube(args.input)
    region_map = partition_cube(cube, args.method, args.superpixels, alpha=args.alpha, sigma_g=args.sigma_g,
                                seed=args.seed)
    write_labels(LabelMap(region_map.labels + 1), args.output)
    print(f"{region_map.count} regions")


def cmd_reduce(args: argparse.Namespace) -> None:
    cube = load_cube(args.input)
    if args.regions:
        region_map = load_regions(args.regions)
    elif args.method == 'global':
        region_map = RegionMap.single(cube.rows, cube.cols)
    elif args.superpixels is None:
        raise ParameterError(f"method {args.method} needs --superpixels or --regions")
    else:
        region_map = partition_cube(cube, args.method, args.superpixels, alpha=args.alpha, sigma_g=args.sigma_g,
                                    seed=args.seed)
    reduced = reduce_cube(cube, region_map, args.dim, args.method, args.keep_offset)
    write_hsif(reduced.cube, args.output)


def cmd_multiscale(args: argparse.Namespace) -> None:
    apply_scene(args)
    cube = load_cube(args.input)
    schedule = scale_schedule(args.sf, args.scales, cube.pixels)
    ensemble = run_multiscale(cube, schedule, args.dim, args.alpha, sigma_g=args.sigma_g,
                              keep_offset=args.keep_offset)
    for (exponent, superpixels), reduced in zip(schedule.items(), ensemble.reduced):
        write_hsif(reduced.cube, f"{args.output_prefix}_c{exponent:+d}_s{superpixels}.hsif")
    print(f"schedule: {list(schedule.counts)}")


def cmd_classify(args: argparse.Namespace) -> None:
    features = load_cube(args.features)
    gt = load_label_map(args.gt)
    check_size(features, gt, 'ground truth')
    split = split_samples(gt, args.train, args.seed)
    feats = features.to_pixels().reshape(features.pixels, features.bands)
    truth = gt.flat()
    predicted = classify_features(args.classifier, feats[split.train], truth[split.train], feats, args.seed)
    write_labels(LabelMap(predicted.reshape(gt.rows, gt.cols)), args.output)


def cmd_fuse(args: argparse.Namespace) -> None:
    maps = [load_label_map(path) for path in args.inputs]
    shape = maps[0].labels.shape
    for path, label_map in zip(args.inputs, maps):
        if label_map.labels.shape != shape:
            raise ContractError(f"{path} is {label_map.rows}x{label_map.cols}, expected {shape[0]}x{shape[1]}")
    fused = fuse_label_maps(np.stack([label_map.flat() for label_map in maps]), args.weights)
    write_labels(LabelMap(fused.reshape(shape)), args.output)


def cmd_evaluate(args: argparse.Namespace) -> None:
    prediction = load_label_map(args.prediction)
    gt = load_label_map(args.gt)
    if prediction.labels.shape != gt.labels.shape:
        raise ContractError(f"prediction is {prediction.rows}x{prediction.cols} but the ground truth is "
                            f"{gt.rows}x{gt.cols}")
    split = split_samples(gt, args.train, args.seed)
    truth = gt.flat()[split.test]
    report = summarize(truth, prediction.flat()[split.test], np.unique(truth))
    emit_table(pd.DataFrame([report.as_dict()]), args.csv)
    recalls = pd.DataFrame({'class': list(report.recalls), 'recall': list(report.recalls.values())})
    print(format_table(recalls))
    if args.recall_csv:
        write_table_csv(recalls, args.recall_csv)


def cmd_ratios(args: argparse.Namespace) -> None:
    cube = load_cube(args.input)
    if args.regions:
        region_map = load_regions(args.regions)
    else:
        region_map = partition_cube(cube, 'superpca', args.superpixels, alpha=args.alpha, sigma_g=args.sigma_g)
    report = region_eigen_ratios(cube, region_map)
    frame = pd.DataFrame([{'region': region, 'pixels': report.sizes[region], 'ratio': ratio}
                          for region, ratio in report.entries()], columns=['region', 'pixels', 'ratio'])
    emit_table(frame, args.csv)
    print(f"global ratio {report.global_ratio:.4f}, mean region ratio {report.mean_ratio:.4f}")


def cmd_render(args: argparse.Namespace) -> None:
    render_map(load_label_map(args.input), args.output)


def _log_event(event: dict) -> None:
    name = event['name']
    if name == 'scale_failed':
        logger.warning('scale c=%+d (S=%d) failed: %s', event['scale'], event['superpixels'], event['error'])
    elif name in ('scale_started', 'scale_finished'):
        logger.info('%s c=%+d (S=%d)', name.replace('_', ' '), event['scale'], event['superpixels'])


def cmd_pipeline(args: argparse.Namespace) -> None:
    apply_scene(args)
    cube = load_cube(args.input)
    gt = load_label_map(args.gt)
    check_size(cube, gt, 'ground truth')
    pipeline = Pipeline(sf=args.sf, scales=args.scales, dim=args.dim, train=args.train, seed=args.seed,
                        classifier=args.classifier, repeats=args.repeats, filter_radius=args.filter_radius,
                        noise=args.noise, scale_range=_scale_range(args), alpha=args.alpha, sigma_g=args.sigma_g,
                        keep_offset=args.keep_offset)
    pipeline.events.subscribe(_log_event)
    print(f"protocol: T={args.train} per class, R={args.repeats} repeats, classifier {args.classifier}, "
          f"S_f={args.sf}, C={args.scales}, d={args.dim}")
    result = pipeline.run(cube, gt)
    emit_table(result.table(), args.csv)
    if args.recall_csv:
        write_table_csv(result.recall_table(), args.recall_csv)


def cmd_ablation(args: argparse.Namespace) -> None:
    apply_scene(args)
    cube = load_cube(args.input)
    gt = load_label_map(args.gt)
    check_size(cube, gt, 'ground truth')
    frame = run_ablation(cube, gt, args.train_sizes, args.noise_levels, sf=args.sf, dim=args.dim,
                         seed=args.seed, classifier=args.classifier, repeats=args.repeats,
                         filter_radius=args.filter_radius, alpha=args.alpha, sigma_g=args.sigma_g,
                         keep_offset=args.keep_offset, scale_range=_scale_range(args))
    emit_table(frame, args.csv)


def cmd_sweep(args: argparse.Namespace) -> None:
    apply_scene(args)
    cube = load_cube(args.input)
    gt = load_label_map(args.gt)
    check_size(cube, gt, 'ground truth')
    frame = run_sweep(cube, gt, args.sf_values, args.scale_values, sf=args.sf, dim=args.dim, train=args.train,
                      seed=args.seed, classifier=args.classifier, repeats=args.repeats,
                      filter_radius=args.filter_radius, alpha=args.alpha, sigma_g=args.sigma_g,
                      scale_range=_scale_range(args))
    emit_table(frame, args.csv)


def cmd_synthetic(args: argparse.Namespace) -> None:
    noise = {} if args.noise is None else {'noise': args.noise}
    if args.layout == 'plots':
        cube, gt = make_plot_scene(args.plots, args.plot_size, args.bands, seed=args.seed, **noise)
    else:
        cube, gt = make_synthetic_scene(args.rows, args.cols, args.bands, args.regions, args.rank, seed=args.seed,
                                        **noise)
    write_hsif(cube, args.output)
    write_labels(gt, args.gt_output)


def _add_ers_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--alpha', type=auto_or_float, default='auto', help="ERS balancing weight or 'auto'")
    parser.add_argument('--sigma-g', dest='sigma_g', type=auto_or_float, default='auto',
                        help="similarity scale of the segmentation graph or 'auto'")


def _add_protocol_flags(parser: argparse.ArgumentParser, train: bool = True) -> None:
    parser.add_argument('--input', required=True, help='cube (.hsif, .npy, .mat or text export)')
    parser.add_argument('--gt', required=True, help='ground truth label file')
    parser.add_argument('--scene', choices=sorted(SCENE_PRESETS), help='fill unset settings from a scene preset')
    parser.add_argument('--sf', type=positive_int, help='fundamental superpixel count')
    parser.add_argument('--dim', type=positive_int, help='reduced dimension d')
    if train:
        parser.add_argument('--train', type=positive_int, default=30, help='training samples per class')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--classifier', choices=('nn', 'linear'), default='nn')
    parser.add_argument('--repeats', type=positive_int, default=10)
    parser.add_argument('--filter-radius', dest='filter_radius', type=non_negative_int,
                        help='weighted mean filter radius, 0 disables filtering')
    parser.add_argument('--keep-offset', dest='keep_offset', action='store_true',
                        help='keep region means in the reduced features')
    parser.add_argument('--scale-range', dest='scale_range', nargs=2, type=float, metavar=('LOW', 'HIGH'),
                        help='rescale the cube onto [LOW, HIGH] before adding noise')
    parser.add_argument('--csv', help='write the result table as CSV')
    _add_ers_flags(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='superpca',
                                     description='Superpixel-wise PCA for hyperspectral image classification.')
    parser.add_argument('--verbose', action='store_true', help='log progress')
    parser.add_argument('--debug', action='store_true', help='log debugging details')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    sub = commands.add_parser('convert', help='convert .npy, .mat or text exports to HSIF or label files')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--key', help='variable name inside a .mat file')
    sub.set_defaults(handler=cmd_convert)

    sub = commands.add_parser('filter', help='edge-preserving weighted mean filter')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--radius', type=non_negative_int, default=2)
    sub.add_argument('--sigma', type=float, help='spectral similarity scale, estimated when omitted')
    sub.add_argument('--equal-weights', dest='equal_weights', action='store_true', help='plain mean filter')
    sub.set_defaults(handler=cmd_filter)

    sub = commands.add_parser('noise', help='add white Gaussian noise')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--sigma', type=non_negative_float, required=True)
    sub.add_argument('--seed', type=int, default=0)
    sub.set_defaults(handler=cmd_noise)

    sub = commands.add_parser('segment', help='partition the image into regions')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True, help='region file, region k stored as k + 1')
    sub.add_argument('--superpixels', type=positive_int, required=True)
    sub.add_argument('--method', choices=METHODS, default='superpca')
    sub.add_argument('--seed', type=int, default=0)
    _add_ers_flags(sub)
    sub.set_defaults(handler=cmd_segment)

    sub = commands.add_parser('reduce', help='region-wise PCA')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--method', choices=METHODS, default='superpca')
    sub.add_argument('--dim', type=positive_int, default=30)
    sub.add_argument('--superpixels', type=positive_int)
    sub.add_argument('--regions', help='region file written by the segment command')
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--keep-offset', dest='keep_offset', action='store_true')
    _add_ers_flags(sub)
    sub.set_defaults(handler=cmd_reduce)

    sub = commands.add_parser('multiscale', help='SuperPCA at every scale of a schedule')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output-prefix', dest='output_prefix', required=True)
    sub.add_argument('--scene', choices=sorted(SCENE_PRESETS))
    sub.add_argument('--sf', type=positive_int)
    sub.add_argument('--scales', type=non_negative_int)
    sub.add_argument('--dim', type=positive_int)
    sub.add_argument('--keep-offset', dest='keep_offset', action='store_true')
    _add_ers_flags(sub)
    sub.set_defaults(handler=cmd_multiscale)

    sub = commands.add_parser('classify', help='train on a split and label every pixel')
    sub.add_argument('--features', required=True, help='reduced cube')
    sub.add_argument('--gt', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--train', type=positive_int, default=30)
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--classifier', choices=('nn', 'linear'), default='nn')
    sub.set_defaults(handler=cmd_classify)

    sub = commands.add_parser('fuse', help='majority vote over label maps')
    sub.add_argument('--inputs', nargs='+', required=True)
    sub.add_argument('--output', required=True)
    sub.add_argument('--weights', nargs='+', type=non_negative_float, help='voting weights summing to 1')
    sub.set_defaults(handler=cmd_fuse)

    sub = commands.add_parser('evaluate', help='OA, AA, Kappa and per-class recall on the test split')
    sub.add_argument('--prediction', required=True)
    sub.add_argument('--gt', required=True)
    sub.add_argument('--train', type=positive_int, default=30)
    sub.add_argument('--seed', type=int, default=0)
    sub.add_argument('--csv')
    sub.add_argument('--recall-csv', dest='recall_csv')
    sub.set_defaults(handler=cmd_evaluate)

    sub = commands.add_parser('ratios', help='first-to-second eigenvalue ratio per region')
    sub.add_argument('--input', required=True)
    sub.add_argument('--regions', help='region file; ERS superpixels when omitted')
    sub.add_argument('--superpixels', type=positive_int, default=100)
    sub.add_argument('--csv')
    _add_ers_flags(sub)
    sub.set_defaults(handler=cmd_ratios)

    sub = commands.add_parser('render', help='classification map as a PPM image')
    sub.add_argument('--input', required=True)
    sub.add_argument('--output', required=True)
    sub.set_defaults(handler=cmd_render)

    sub = commands.add_parser('pipeline', help='filter, multiscale SuperPCA, classification and fusion')
    _add_protocol_flags(sub)
    sub.add_argument('--scales', type=non_negative_int, help='half-width C of the schedule')
    sub.add_argument('--noise', type=non_negative_float, default=0.0, help='AWGN sigma added before filtering')
    sub.add_argument('--recall-csv', dest='recall_csv')
    sub.set_defaults(handler=cmd_pipeline)

    sub = commands.add_parser('ablation', help='global, cluster, square and superpixel PCA side by side')
    _add_protocol_flags(sub, train=False)
    sub.add_argument('--train-sizes', dest='train_sizes', nargs='+', type=positive_int, default=[5, 10, 20, 30])
    sub.add_argument('--noise-levels', dest='noise_levels', nargs='+', type=non_negative_float, default=[0.0])
    sub.set_defaults(handler=cmd_ablation)

    sub = commands.add_parser('sweep', help='accuracy against S_f and against the number of scales')
    _add_protocol_flags(sub)
    sub.add_argument('--sf-values', dest='sf_values', nargs='+', type=positive_int, default=list(DEFAULT_SF_VALUES))
    sub.add_argument('--scale-values', dest='scale_values', nargs='+', type=non_negative_int,
                     default=list(DEFAULT_SCALE_VALUES))
    sub.set_defaults(handler=cmd_sweep)

    sub = commands.add_parser('synthetic', help='generate a synthetic scene with its ground truth')
    sub.add_argument('--output', required=True)
    sub.add_argument('--gt-output', dest='gt_output', required=True)
    sub.add_argument('--layout', choices=('regions', 'plots'), default='regions',
                     help='Voronoi regions of mixed spectra, or a grid of square field plots')
    sub.add_argument('--rows', type=positive_int, default=48)
    sub.add_argument('--cols', type=positive_int, default=48)
    sub.add_argument('--bands', type=positive_int, default=20)
    sub.add_argument('--regions', type=positive_int, default=4)
    sub.add_argument('--rank', type=positive_int, default=2)
    sub.add_argument('--plots', type=positive_int, default=6, help='plots per side of the plot layout')
    sub.add_argument('--plot-size', dest='plot_size', type=positive_int, default=8)
    sub.add_argument('--noise', type=non_negative_float,
                     help='noise relative to the signal standard deviation (0.05 for regions, 0.01 for plots)')
    sub.add_argument('--seed', type=int, default=0)
    sub.set_defaults(handler=cmd_synthetic)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(format=LOG_FORMAT, level=level)
    logging.getLogger('superpca').setLevel(level)
    try:
        args.handler(args)
    except ParameterError as err:
        parser.print_usage(sys.stderr)
        print(f"superpca {args.command}: {err}", file=sys.stderr)
        return 2
    except _runtime_errors as err:
        print(f"superpca {args.command}: {err}", file=sys.stderr)
        return 1
    return 0
