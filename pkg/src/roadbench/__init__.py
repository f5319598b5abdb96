"""Benchmark harness and dataset toolkit for three-country road-damage
detection: dataset loading and validation, exploration statistics,
stratified splitting, F1/IoU scoring, copy-paste augmentation, and
prediction/submission file handling."""

from .augment import (
    AugmentationSchedule,
    JitterConfig,
    LocationBank,
    PatchBank,
    PhotometricConfig,
    build_location_bank,
    build_patch_bank,
    photometric_augment,
    synthesize,
)
from .color import color_transfer, lab_to_rgb, rgb_to_lab
from .dataset import (
    ALL_CLASSES,
    ALL_COUNTRIES,
    Annotation,
    BoundingBox,
    Country,
    DamageClass,
    Dataset,
    DatasetLayout,
    ImageRecord,
    ParseWarning,
    load_dataset,
    parse_voc_annotation,
    record_to_voc_xml,
    write_warning_log,
)
from .errors import DataError
from .evaluator import (
    Counts,
    Detection,
    EvalReport,
    PredictionSet,
    evaluate,
    iou,
    match_detections,
    nms_per_class,
    sweep_thresholds,
)
from .formats import (
    SubmissionFile,
    build_submission,
    merge_pseudo_labels,
    parse_predictions,
    predictions_to_text,
    read_predictions,
    write_predictions,
)
from .report import (
    OverlaySpec,
    emit_charts,
    render_brightness_probe,
    render_overlay,
)
from .split import SplitResult, save_split, stratified_split
from .stats import (
    AnchorRecommendation,
    ClassDistribution,
    Histogram,
    aspect_ratio_histogram,
    box_area_histogram,
    channel_pixel_means,
    class_distribution,
    recommend_anchors,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_CLASSES",
    "ALL_COUNTRIES",
    "AnchorRecommendation",
    "Annotation",
    "AugmentationSchedule",
    "BoundingBox",
    "ClassDistribution",
    "Country",
    "Counts",
    "DamageClass",
    "DataError",
    "Dataset",
    "DatasetLayout",
    "Detection",
    "EvalReport",
    "Histogram",
    "ImageRecord",
    "JitterConfig",
    "LocationBank",
    "OverlaySpec",
    "ParseWarning",
    "PatchBank",
    "PhotometricConfig",
    "PredictionSet",
    "SplitResult",
    "SubmissionFile",
    "aspect_ratio_histogram",
    "box_area_histogram",
    "build_location_bank",
    "build_patch_bank",
    "build_submission",
    "channel_pixel_means",
    "class_distribution",
    "color_transfer",
    "emit_charts",
    "evaluate",
    "iou",
    "lab_to_rgb",
    "load_dataset",
    "match_detections",
    "merge_pseudo_labels",
    "nms_per_class",
    "parse_predictions",
    "parse_voc_annotation",
    "photometric_augment",
    "predictions_to_text",
    "read_predictions",
    "recommend_anchors",
    "record_to_voc_xml",
    "render_brightness_probe",
    "render_overlay",
    "rgb_to_lab",
    "save_split",
    "stratified_split",
    "sweep_thresholds",
    "synthesize",
    "write_predictions",
    "write_warning_log",
]
