"""Cardiac-pattern-guided bidirectional CutMix engine for ECG wave segmentation.

The package fuses ECG segments between labeled and unlabeled batches, guiding
segment selection by class-averaged label IoU so that augmented samples keep
valid P-QRS-T structure, with confidence gating on the unlabeled-to-labeled
direction. Preprocessing, evaluation metrics, consistency analysis, a
synthetic data generator, file formats, and a CLI round out the toolkit.
"""

from .consistency import Violation, consistency_ratio, find_violations
from .core import (
    BG,
    NUM_CLASSES,
    P_WAVE,
    QRS,
    T_WAVE,
    ArgumentError,
    DataFormatError,
    EcgRecord,
    Window,
    argmax_labels,
    as_labels,
    as_probability_map,
    labels_from_string,
    labels_to_string,
    to_dense,
    to_runs,
)
from .fusion import (
    FusionOutcome,
    FusionParams,
    StepResult,
    cardiomix_step,
    fuse_l2u,
    fuse_u2l,
    search_best_key,
    segment_confidence,
    splice,
    vanilla_cutmix,
)
from .io_formats import (
    Dataset,
    DatasetRecord,
    SynthParams,
    corrupt_labels,
    load_dataset,
    load_record,
    save_dataset,
    save_record,
    synth_ecg,
)
from .metrics import (
    BeatFiducials,
    IntervalMae,
    confusion_matrix,
    extract_fiducials,
    interval_mae,
    miou,
    per_class_iou,
)
from .preprocess import bandpass, fix_duration, preprocess_pipeline, resample, zscore
from .rng import Stream
from .similarity import (
    SimScore,
    WindowScan,
    cosine_signal_sim,
    default_stride,
    enumerate_windows,
    iou_class,
    sim,
    sliding_sim,
)

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "BG",
    "BeatFiducials",
    "DataFormatError",
    "Dataset",
    "DatasetRecord",
    "EcgRecord",
    "FusionOutcome",
    "FusionParams",
    "IntervalMae",
    "NUM_CLASSES",
    "P_WAVE",
    "QRS",
    "SimScore",
    "StepResult",
    "Stream",
    "SynthParams",
    "T_WAVE",
    "Violation",
    "Window",
    "WindowScan",
    "argmax_labels",
    "as_labels",
    "as_probability_map",
    "bandpass",
    "cardiomix_step",
    "confusion_matrix",
    "consistency_ratio",
    "corrupt_labels",
    "cosine_signal_sim",
    "default_stride",
    "enumerate_windows",
    "extract_fiducials",
    "find_violations",
    "fix_duration",
    "fuse_l2u",
    "fuse_u2l",
    "interval_mae",
    "iou_class",
    "labels_from_string",
    "labels_to_string",
    "load_dataset",
    "load_record",
    "miou",
    "per_class_iou",
    "preprocess_pipeline",
    "resample",
    "save_dataset",
    "save_record",
    "search_best_key",
    "segment_confidence",
    "sim",
    "sliding_sim",
    "splice",
    "synth_ecg",
    "to_dense",
    "to_runs",
    "vanilla_cutmix",
    "zscore",
]
