"""Synthetic watermark-plate rendering, confidence-map learning, and decoding.

The package covers the full pipeline: domain-randomized rendering of
bump-embossed plates with exact ground-truth bump masks, a small
fully-convolutional confidence network trained from scratch on numpy,
and a landmark/homography/threshold/cluster decoder that recovers the
embedded bit matrix from a single photograph.
"""

from .errors import (
    BumpmarkError,
    DataError,
    DegenerateConfiguration,
    InvalidArgument,
    InvalidLayout,
    LandmarkAmbiguous,
    LandmarkNotFound,
    NumericError,
    RenderError,
    RetrievalError,
    ShapeError,
)
from .watermark import (
    GridLayout,
    BumpSet,
    default_layout,
    layout_geometry,
    load_bits,
    random_bit_matrix,
    save_bits,
    validate_bits,
)
from .scene import LightSource, SceneConfig, SceneTemplate, default_template, scene_at_clock
from .render import render_ground_truth, render_image, composite_background, procedural_background
from .dataset import (
    DatasetManifest,
    ManifestEntry,
    generate_dataset,
    load_manifest,
    save_manifest,
)
from .nn.model import ConfidenceNet, load_weights, save_weights
from .nn.train import TrainConfig, train_network
from .decode import (
    Diagnostics,
    RetrievalParams,
    binarize,
    decode_map,
    estimate_homography,
    kmeans_1d,
    otsu_threshold,
    region_analysis,
    retrieve,
    warp_map,
)
from .metrics import ImageScore, MetricsReport, bit_metrics
from .experiment import ExperimentConfig, overlay_diagnostics, run_ablation, run_experiment

__version__ = "0.1.0"

__all__ = [
    "BumpmarkError",
    "DataError",
    "DegenerateConfiguration",
    "InvalidArgument",
    "InvalidLayout",
    "LandmarkAmbiguous",
    "LandmarkNotFound",
    "NumericError",
    "RenderError",
    "RetrievalError",
    "ShapeError",
    "GridLayout",
    "BumpSet",
    "default_layout",
    "layout_geometry",
    "load_bits",
    "random_bit_matrix",
    "save_bits",
    "validate_bits",
    "LightSource",
    "SceneConfig",
    "SceneTemplate",
    "default_template",
    "scene_at_clock",
    "render_ground_truth",
    "render_image",
    "composite_background",
    "procedural_background",
    "DatasetManifest",
    "ManifestEntry",
    "generate_dataset",
    "load_manifest",
    "save_manifest",
    "ConfidenceNet",
    "load_weights",
    "save_weights",
    "TrainConfig",
    "train_network",
    "Diagnostics",
    "RetrievalParams",
    "binarize",
    "decode_map",
    "estimate_homography",
    "kmeans_1d",
    "otsu_threshold",
    "region_analysis",
    "retrieve",
    "warp_map",
    "ImageScore",
    "MetricsReport",
    "bit_metrics",
    "ExperimentConfig",
    "overlay_diagnostics",
    "run_ablation",
    "run_experiment",
    "__version__",
]
