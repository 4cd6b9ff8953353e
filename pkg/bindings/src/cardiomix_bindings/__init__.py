"""Thin in-process bindings exposing the fusion engine to training pipelines.

Entry points operate on contiguous numeric buffers (numpy arrays or anything
exposing the buffer protocol) at batch granularity and delegate straight to
the ``cardiomix`` library, so results are bit-identical to calling it
directly and to the CLI on the same data. Inputs with the right dtype and
C-contiguous layout are consumed zero-copy; anything else is converted.

Shape or width mismatches raise the primary library's own exceptions
(``cardiomix.ArgumentError``) with their original diagnostics. The heavy
lifting happens inside numpy kernels, which release the interpreter lock;
determinism is unaffected by threading (per-sample substreams are keyed, not
ordered).
"""

from __future__ import annotations

import numpy as np

from cardiomix import (
    ArgumentError,
    FusionParams,
    Stream,
    cardiomix_step,
    consistency_ratio,
    fuse_l2u,
    fuse_u2l,
    sim,
    vanilla_cutmix,
)
from cardiomix.cli import OUTCOME_COLUMNS, outcome_row, outcomes_csv_text
from cardiomix.metrics import (
    confusion_matrix,
    extract_fiducials,
    interval_abs_errors,
    interval_mae_from_errors,
    match_beats,
    per_class_iou,
)

__version__ = "0.1.0"

__all__ = [
    "OUTCOME_COLUMNS",
    "bind_consistency_ratio",
    "bind_fuse_batch",
    "bind_metrics",
    "bind_sim",
    "outcomes_csv_text",
]


def _rows(matrix, name: str) -> list[np.ndarray]:
    arr = np.ascontiguousarray(matrix)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be a 2-D (batch, time) buffer")
    return [arr[i] for i in range(arr.shape[0])]


def _prob_stacks(probs, name: str) -> list[np.ndarray]:
    arr = np.ascontiguousarray(probs)
    if arr.ndim != 3:
        raise ArgumentError(f"{name} must be a 3-D (batch, time, classes) buffer")
    return [arr[i] for i in range(arr.shape[0])]


def bind_sim(a_buffer, b_buffer) -> float:
    """Pattern similarity of two equal-width label buffers."""
    return sim(a_buffer, b_buffer).value


def bind_consistency_ratio(label_batch) -> float:
    """Fraction of label rows free of cardiac-order violations."""
    return consistency_ratio(_rows(label_batch, "label_batch"))


def bind_metrics(preds, gts, sample_rate: int) -> dict:
    """Segmentation and interval metrics of prediction rows vs ground truth.

    Returns a dict with per-class IoU, mIoU, PR/QRS/QT/avg MAE in ms (None
    when undefined), and matched-beat counts; values equal the primary
    library's output on the same data.
    """
    pred_rows = _rows(preds, "preds")
    gt_rows = _rows(gts, "gts")
    if len(pred_rows) != len(gt_rows):
        raise ArgumentError(
            f"batch sizes differ: {len(pred_rows)} preds vs {len(gt_rows)} gts")
    cm = confusion_matrix(pred_rows, gt_rows)
    ious = per_class_iou(cm)
    errors = {"pr": [], "qrs": [], "qt": []}
    matched = 0
    for pred, gt in zip(pred_rows, gt_rows):
        matches = match_beats(extract_fiducials(pred), extract_fiducials(gt),
                              sample_rate)
        matched += len(matches)
        for name, errs in interval_abs_errors(matches, sample_rate).items():
            errors[name].extend(errs)
    summary = interval_mae_from_errors(errors, matched)
    return {
        "iou_bg": float(ious[0]),
        "iou_p": float(ious[1]),
        "iou_qrs": float(ious[2]),
        "iou_t": float(ious[3]),
        "miou": float(ious.mean()),
        "mae_pr_ms": summary.pr_mae_ms,
        "mae_qrs_ms": summary.qrs_mae_ms,
        "mae_qt_ms": summary.qt_mae_ms,
        "mae_avg_ms": summary.avg_mae_ms,
        "matched_beats": summary.matched_beats,
        "pr_pairs": summary.pr_pairs,
        "qrs_pairs": summary.qrs_pairs,
        "qt_pairs": summary.qt_pairs,
    }


def _as_params(params) -> FusionParams:
    if params is None:
        return FusionParams()
    if isinstance(params, FusionParams):
        return params
    return FusionParams(**params)


def bind_fuse_batch(labeled_signals, labeled_labels, unlabeled_signals,
                    unlabeled_probs, params=None, *, mode: str = "cardiomix",
                    labeled_ids=None, unlabeled_ids=None, threads: int = 1):
    """One fusion step over whole-batch buffers.

    ``labeled_signals``/``labeled_labels`` are (N_l, T); ``unlabeled_signals``
    is (N_u, T) and ``unlabeled_probs`` (N_u, T, C). ``params`` is a
    :class:`cardiomix.FusionParams` or a mapping of its fields (``seed``
    drives the run). Returns ``(fused_signals, fused_labels, outcomes)``
    where the arrays stack every fused sample in outcome order and
    ``outcomes`` are CSV-ready rows identical to the CLI's ``outcomes.csv``
    for a one-step run over the same pools (serialize them with
    :func:`outcomes_csv_text`).
    """
    params = _as_params(params)
    u_signals = _rows(unlabeled_signals, "unlabeled_signals")
    u_probs = _prob_stacks(unlabeled_probs, "unlabeled_probs")
    if len(u_signals) != len(u_probs):
        raise ArgumentError("unlabeled signal and probability batch sizes differ")
    unlabeled = list(zip(u_signals, u_probs))
    if unlabeled_ids is None:
        unlabeled_ids = [str(i) for i in range(len(unlabeled))]

    root = Stream(params.seed).child(0)  # CLI step 0 stream
    tagged = []
    if mode == "vanilla":
        for i, o in enumerate(vanilla_cutmix(unlabeled, params, root, threads=threads)):
            tagged.append(("vanilla", unlabeled_ids[i], o))
    else:
        l_signals = _rows(labeled_signals, "labeled_signals")
        l_labels = _rows(labeled_labels, "labeled_labels")
        if len(l_signals) != len(l_labels):
            raise ArgumentError("labeled signal and label batch sizes differ")
        labeled = list(zip(l_signals, l_labels))
        if labeled_ids is None:
            labeled_ids = [str(i) for i in range(len(labeled))]
        if mode == "cardiomix":
            result = cardiomix_step(labeled, unlabeled, params, root, threads=threads)
            l2u, u2l = result.l2u, result.u2l
        elif mode == "l2u":
            l2u = fuse_l2u(unlabeled, labeled, params, root, threads=threads)
            u2l = []
        elif mode == "u2l":
            l2u = []
            u2l = fuse_u2l(labeled, unlabeled, params, root, threads=threads)
        else:
            raise ArgumentError(f"unknown mode {mode!r}")
        for i, o in enumerate(l2u):
            tagged.append(("l2u", unlabeled_ids[i], o))
        for i, o in enumerate(u2l):
            tagged.append(("u2l", labeled_ids[i], o))

    fused_signals = np.stack([o.fused_signal for _, _, o in tagged])
    fused_labels = np.stack([o.fused_labels for _, _, o in tagged])
    outcomes = [outcome_row(0, direction, rid, o) for direction, rid, o in tagged]
    return fused_signals, fused_labels, outcomes
