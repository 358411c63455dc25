"""Deterministic mosaic + clustered-patch-mix augmentation for paired rasters.

The pipeline builds augmented training samples in two gated phases:
first a four-quadrant mosaic of independently transformed samples, then
instance patches cut out of a donor label map by connected-component
labeling and composited (image and label jointly) under their binary
masks. Everything is seedable down to the individual output sample.
"""

from .augment import (
    AugmentConfig,
    AugmentResult,
    Patch,
    PatchMixPlan,
    PlacedPatch,
    augment_sample,
    clustered_patch_mix,
    flip,
    load_augment_config,
    mosaic,
    parse_augment_config,
    paste_patch,
    plan_patch_mix,
    random_crop,
    random_geom,
    rotate_quarter,
    run_stream,
    sample_stream,
)
from .ccl import (
    Instance,
    InstanceMap,
    extract_instances,
    instances_from_map,
    label_components,
)
from .dataset import (
    Manifest,
    ManifestEntry,
    SampleReader,
    TileSpec,
    load_manifest,
    save_manifest,
    tile,
    tile_count,
)
from .errors import (
    ColorMapError,
    ConfigError,
    DecodeError,
    EmptySplitError,
    EvaluationError,
    ManifestError,
    PatchMosaicError,
    PlacementError,
    SizeError,
    UnsupportedFormatError,
)
from .metrics import (
    ConfusionMatrix,
    LossParams,
    ce_gradient,
    confusion,
    iou_per_class,
    miou,
    pixel_accuracy,
    softmax,
    uniform_loss_params,
    weighted_ce,
    zero_confusion,
)
from .preview import PreviewPanel, render_preview
from .raster import (
    ColorMap,
    SamplePair,
    color_from_label,
    decode_image,
    encode_image,
    label_from_color,
    load_colormap,
    parse_colormap,
    potsdam_colormap,
    read_image,
    save_colormap,
    write_image,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "AugmentResult",
    "ColorMap",
    "ColorMapError",
    "ConfigError",
    "ConfusionMatrix",
    "DecodeError",
    "EmptySplitError",
    "EvaluationError",
    "Instance",
    "InstanceMap",
    "LossParams",
    "Manifest",
    "ManifestEntry",
    "ManifestError",
    "Patch",
    "PatchMixPlan",
    "PatchMosaicError",
    "PlacedPatch",
    "PlacementError",
    "PreviewPanel",
    "SamplePair",
    "SampleReader",
    "SizeError",
    "TileSpec",
    "UnsupportedFormatError",
    "augment_sample",
    "ce_gradient",
    "clustered_patch_mix",
    "color_from_label",
    "confusion",
    "decode_image",
    "encode_image",
    "extract_instances",
    "flip",
    "instances_from_map",
    "iou_per_class",
    "label_components",
    "label_from_color",
    "load_augment_config",
    "load_colormap",
    "load_manifest",
    "miou",
    "mosaic",
    "parse_augment_config",
    "parse_colormap",
    "paste_patch",
    "pixel_accuracy",
    "plan_patch_mix",
    "potsdam_colormap",
    "random_crop",
    "random_geom",
    "read_image",
    "render_preview",
    "rotate_quarter",
    "run_stream",
    "sample_stream",
    "save_colormap",
    "save_manifest",
    "softmax",
    "tile",
    "tile_count",
    "uniform_loss_params",
    "weighted_ce",
    "write_image",
    "zero_confusion",
]
