"""Iterative self-training pipeline for Y-shaped tree skeleton masks.

A numpy/scipy library covering the whole loop: binary-mask primitives,
heuristic blob filters, the 14-parameter Y-tree template with GA fitting,
template-guided mask repair, segmentation metrics (mIOU, boundary F1, and
the Complete Grid Scan), the dataset-iteration orchestrator with a
subprocess predictor protocol, and a synthetic benchmark with a mock
predictor.  The ``treeloop`` CLI exposes every stage for batch use.
"""

from .filters import FilterConfig, atl_pre_filter, scaled_config, y_shaped_tree_filter
from .gafit import FitResult, GaConfig, fit_tree, fitness_mae
from .mask import (
    Blob,
    PartialSkeleton,
    RowRun,
    column_runs,
    connected_components,
    keep_largest_blob,
    load_mask,
    row_runs,
    save_mask,
    to_partial_skeleton,
)
from .metrics import MetricReport, boundary_f1, cgs, cgs_horizontal, mean_iou, score_pair
from .repair import RepairConfig, RepairOutcome, fill_thickness, measure_thickness, repair
from .template import TemplateCurves, YTreeParams, build_curves, evaluate, rasterize

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Blob",
    "RowRun",
    "PartialSkeleton",
    "connected_components",
    "row_runs",
    "column_runs",
    "to_partial_skeleton",
    "keep_largest_blob",
    "load_mask",
    "save_mask",
    "FilterConfig",
    "scaled_config",
    "atl_pre_filter",
    "y_shaped_tree_filter",
    "YTreeParams",
    "TemplateCurves",
    "build_curves",
    "evaluate",
    "rasterize",
    "GaConfig",
    "FitResult",
    "fit_tree",
    "fitness_mae",
    "RepairConfig",
    "RepairOutcome",
    "measure_thickness",
    "fill_thickness",
    "repair",
    "MetricReport",
    "mean_iou",
    "boundary_f1",
    "cgs",
    "cgs_horizontal",
    "score_pair",
]
