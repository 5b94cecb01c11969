"""Cocoa pod disease detection toolkit.

Dataset handling, detector evaluation, per-pod diagnosis, training-log trend
checks, and an HTTP service that ties them together for a diagnosis UI.
"""

from .annotations import (
    ClassEntry,
    ClassRegistry,
    DatasetManifest,
    DetectionItem,
    GroundTruthItem,
    ImageRecord,
    Violation,
    default_registry,
    dominant_class,
    manifest_stats,
    validate_manifest,
)
from .backends import BackendDescriptor, create_backend, detect
from .diagnosis import (
    Diagnosis,
    DiagnosisConfig,
    DiseaseInfo,
    PodAssessment,
    default_knowledge_base,
    diagnose,
    nms,
    nms_clusters,
)
from .errors import (
    BackendError,
    BackendTransportError,
    ConventionMismatchError,
    EvaluationInputError,
    ParseError,
    PodSentryError,
    SchemaError,
    UndefinedMetricError,
    UnknownClassError,
)
from .evaluation import EvalConfig, EvaluationReport, evaluate, match_detections, pr_curve
from .geometry import BoundingBox, Convention, intersection_area, iou
from .metrics import (
    DEFAULT_INTERPOLATION_POINTS,
    DEFAULT_IOU_THRESHOLDS,
    ApResult,
    ConfusionCounts,
    MapResult,
    PrCurvePoint,
    accuracy,
    average_precision,
    interpolation_levels,
    mean_ap,
    precision_recall,
)
from .preprocess import PreprocessConfig, crop_to_square, resize_square, run_pipeline, split_dataset, transform_box
from .service import ServiceConfig, create_app, load_service_config
from .trainlog import (
    DEFAULT_EXPECTATIONS,
    EpochRecord,
    TrendExpectation,
    check_trends,
    emit_training_report,
    parse_training_log,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_INTERPOLATION_POINTS",
    "DEFAULT_IOU_THRESHOLDS",
    "ApResult",
    "BackendDescriptor",
    "BackendError",
    "BackendTransportError",
    "BoundingBox",
    "ClassEntry",
    "ClassRegistry",
    "ConfusionCounts",
    "Convention",
    "ConventionMismatchError",
    "DEFAULT_EXPECTATIONS",
    "DatasetManifest",
    "DetectionItem",
    "Diagnosis",
    "DiagnosisConfig",
    "DiseaseInfo",
    "EpochRecord",
    "EvalConfig",
    "EvaluationInputError",
    "EvaluationReport",
    "GroundTruthItem",
    "ImageRecord",
    "MapResult",
    "ParseError",
    "PodAssessment",
    "PodSentryError",
    "PrCurvePoint",
    "PreprocessConfig",
    "SchemaError",
    "ServiceConfig",
    "TrendExpectation",
    "UndefinedMetricError",
    "UnknownClassError",
    "Violation",
    "accuracy",
    "average_precision",
    "check_trends",
    "create_app",
    "create_backend",
    "crop_to_square",
    "default_knowledge_base",
    "default_registry",
    "detect",
    "diagnose",
    "dominant_class",
    "emit_training_report",
    "evaluate",
    "interpolation_levels",
    "intersection_area",
    "iou",
    "load_service_config",
    "manifest_stats",
    "match_detections",
    "mean_ap",
    "nms",
    "nms_clusters",
    "parse_training_log",
    "pr_curve",
    "precision_recall",
    "resize_square",
    "run_pipeline",
    "split_dataset",
    "transform_box",
    "validate_manifest",
]
