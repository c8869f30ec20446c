"""Detonation-cell measurement from soot foil images.

Pipeline stages: synthesize or load a foil image, optionally preprocess it,
obtain a cell label mask from a segmentation backend (built-in classical
backend or an externally produced exchange mask), measure per-cell geometry,
and compute population statistics with evaluation verdicts.
"""

from .errors import (
    CapacityError,
    ConfigError,
    DegenerateDataError,
    FoilmetricError,
    FormatError,
    GenerationError,
    InsufficientCellsError,
    SegmentationError,
    SizeError,
    UnknownLabelError,
)
from .foilgen import FoilSpec, GroundTruth, generate_foil
from .image import (
    GrayImage,
    LabelMask,
    MaskMetadata,
    load_gray,
    load_label_mask,
    save_gray,
    save_label_mask,
)
from .preproc import PreprocConfig, preprocess
from .segment import (
    ExternalMaskBackend,
    FixedMaskBackend,
    NativeBackend,
    NativeSegConfig,
    greedy_iou_match,
    ingest_external_mask,
    native_segment,
    segment,
)
from .features import CellRecord, measure_all, write_csv
from .stats import (
    EvaluationVerdict,
    Histogram,
    KdeCurve,
    evaluate,
    gaussian_kde,
    knuth_bin_count,
    sample_cells,
    transect_report,
    transect_select,
)
from .report import RgbImage, extract_outlines, render_overlay, save_rgb, emit_plot

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CellRecord",
    "ConfigError",
    "DegenerateDataError",
    "EvaluationVerdict",
    "ExternalMaskBackend",
    "FixedMaskBackend",
    "FoilSpec",
    "FoilmetricError",
    "FormatError",
    "GenerationError",
    "GrayImage",
    "GroundTruth",
    "Histogram",
    "InsufficientCellsError",
    "KdeCurve",
    "LabelMask",
    "MaskMetadata",
    "NativeBackend",
    "NativeSegConfig",
    "PreprocConfig",
    "RgbImage",
    "SegmentationError",
    "SizeError",
    "UnknownLabelError",
    "emit_plot",
    "evaluate",
    "extract_outlines",
    "gaussian_kde",
    "generate_foil",
    "greedy_iou_match",
    "ingest_external_mask",
    "knuth_bin_count",
    "load_gray",
    "load_label_mask",
    "measure_all",
    "native_segment",
    "preprocess",
    "render_overlay",
    "sample_cells",
    "save_gray",
    "save_label_mask",
    "save_rgb",
    "segment",
    "transect_report",
    "transect_select",
    "write_csv",
]
