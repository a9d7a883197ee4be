"""Movelet-based activity recognition for wrist-worn accelerometers.

The pipeline: normalize each device's frame from two resting postures
(standing, lying), cut labeled training data into short overlapping
windows (movelets), then label new samples by nearest-window vote.
A synthetic corpus generator with known ground truth supports end-to-end
checks, and a small file layer round-trips every artifact.
"""

from .core import (
    UNLABELED,
    LabelTimeline,
    Segment,
    TriaxialSeries,
    as_vec3,
    check_aligned,
    label_runs,
    magnitude,
    segment_mean,
    segment_view,
    window_samples,
)
from .errors import (
    DegenerateCalibration,
    EmptyDictionary,
    EmptySegment,
    FsMismatch,
    InsufficientSamples,
    InsufficientSubjects,
    InvalidConfig,
    LengthMismatch,
    MoveletsError,
    NonUniformIndex,
    OutOfBounds,
    ParseError,
    SeriesTooShort,
    SingularCovariance,
    UndefinedRate,
    UnknownLabel,
    UnmappedLabel,
    WindowTooLong,
)
from .evaluation import (
    DEFAULT_GROUPING,
    GROUPED_LABELS,
    RAW_ACTIVITY_LABELS,
    ActivityScore,
    GroupingMap,
    HSelectionResult,
    PredictionReport,
    confusion_matrix,
    evaluate_predictions,
    false_prediction_rate,
    group_labels,
    loso_select_h,
    rates_from_confusion,
    true_prediction_rate,
)
from .fileio import (
    PipelineConfig,
    Recording,
    load_bias_result,
    load_config,
    load_dictionary,
    load_labels,
    load_recording,
    load_report,
    load_selection,
    load_transform,
    parse_grouping,
    save_bias_result,
    save_confusion_csv,
    save_dictionary,
    save_labels,
    save_plot_csv,
    save_recording,
    save_report,
    save_selection,
    save_transform,
)
from .matching import (
    MatchResult,
    Movelet,
    MoveletDictionary,
    budget_timeline,
    build_dictionary,
    extract_movelets,
    movelet_distance,
    nearest_match,
    nearest_match_indices,
    predict_labels,
    vote_labels,
)
from .normalize import (
    BiasTestResult,
    NormalizationTransform,
    RotationMatrix,
    apply_transform,
    bias_test,
    calibration_segments,
    estimate_rotation,
    estimate_transform,
    invert_transform,
    labeled_run_segment,
)
from .synth import (
    DEFAULT_PROGRAM,
    SubjectConfig,
    SyntheticSubject,
    generate_subject,
    make_corpus,
    random_bias,
    random_rotation,
    sample_subject_config,
)

__version__ = "0.1.0"

__all__ = [
    "UNLABELED",
    "LabelTimeline",
    "Segment",
    "TriaxialSeries",
    "as_vec3",
    "check_aligned",
    "label_runs",
    "magnitude",
    "segment_mean",
    "segment_view",
    "window_samples",
    "MoveletsError",
    "DegenerateCalibration",
    "EmptyDictionary",
    "EmptySegment",
    "FsMismatch",
    "InsufficientSamples",
    "InsufficientSubjects",
    "InvalidConfig",
    "LengthMismatch",
    "NonUniformIndex",
    "OutOfBounds",
    "ParseError",
    "SeriesTooShort",
    "SingularCovariance",
    "UndefinedRate",
    "UnknownLabel",
    "UnmappedLabel",
    "WindowTooLong",
    "DEFAULT_GROUPING",
    "GROUPED_LABELS",
    "RAW_ACTIVITY_LABELS",
    "ActivityScore",
    "GroupingMap",
    "HSelectionResult",
    "PredictionReport",
    "confusion_matrix",
    "evaluate_predictions",
    "false_prediction_rate",
    "group_labels",
    "loso_select_h",
    "rates_from_confusion",
    "true_prediction_rate",
    "PipelineConfig",
    "Recording",
    "load_bias_result",
    "load_config",
    "load_dictionary",
    "load_labels",
    "load_recording",
    "load_report",
    "load_selection",
    "load_transform",
    "parse_grouping",
    "save_bias_result",
    "save_confusion_csv",
    "save_dictionary",
    "save_labels",
    "save_plot_csv",
    "save_recording",
    "save_report",
    "save_selection",
    "save_transform",
    "MatchResult",
    "Movelet",
    "MoveletDictionary",
    "budget_timeline",
    "build_dictionary",
    "extract_movelets",
    "movelet_distance",
    "nearest_match",
    "nearest_match_indices",
    "predict_labels",
    "vote_labels",
    "BiasTestResult",
    "NormalizationTransform",
    "RotationMatrix",
    "apply_transform",
    "bias_test",
    "calibration_segments",
    "estimate_rotation",
    "estimate_transform",
    "invert_transform",
    "labeled_run_segment",
    "DEFAULT_PROGRAM",
    "SubjectConfig",
    "SyntheticSubject",
    "generate_subject",
    "make_corpus",
    "random_bias",
    "random_rotation",
    "sample_subject_config",
    "__version__",
]
