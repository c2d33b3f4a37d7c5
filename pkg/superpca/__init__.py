"""
.. include:: ../README.md
.. include:: ../docs/usage_examples.md
"""

__pdoc__ = {
    'superpca.errors': False,
    'superpca.utils': False,
    'superpca.in_memory': False,
    'superpca.cli': False,
}

from .classify import LabelMap, VoteProfile, fuse_label_maps, majority_vote, nn_classify, split_samples
from .cube import HsiCube, add_awgn, first_pc_image, scale_to_range, weighted_mean_filter
from .errors import ContractError, FormatError, PaletteError, ParameterError, ParseError, ScaleTaskError
from .experiments import Pipeline, run_ablation, run_sweep
from .linalg import fit_pca, project, sym_eigen
from .metrics import summarize
from .multiscale import MultiscaleRunner, run_multiscale, scale_schedule
from .reduction import global_pca_reduce, region_eigen_ratios, superpca_reduce
from .scenes import SCENE_PRESETS, make_plot_scene, make_synthetic_scene
from .segmentation import RegionMap, build_graph, ers_segment, partition_cube
