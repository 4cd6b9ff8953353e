"""Segmentation quality (mIoU over a global confusion matrix) and clinical
interval errors (PR, QRS, QT mean absolute error in milliseconds).

mIoU aggregates one confusion matrix over every timestep of the evaluation
set (micro aggregation), then averages per-class IoU over all classes; a
class with no support in either predictions or ground truth scores 1.

Interval errors anchor beats on maximal QRS runs, attach the nearest
preceding P run and the first following T run, greedily match beats between
prediction and ground truth by QRS onset, and average |interval difference|
per matched beat globally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NUM_CLASSES, P_WAVE, QRS, T_WAVE, ArgumentError, as_labels, to_runs

DEFAULT_MATCH_TOL_MS = 150.0
INTERVAL_NAMES = ("pr", "qrs", "qt")


def confusion_matrix(preds, gts, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Accumulate a (C, C) [gt][pred] count matrix over paired sequences."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for i, (pred, gt) in enumerate(zip(preds, gts, strict=True)):
        p = as_labels(pred, num_classes)
        g = as_labels(gt, num_classes)
        if p.size != g.size:
            raise ArgumentError(f"pair {i}: pred length {p.size} != gt length {g.size}")
        np.add.at(cm, (g, p), 1)
    return cm


def per_class_iou(cm: np.ndarray) -> np.ndarray:
    """Per-class TP / (TP + FP + FN); classes with zero support score 1."""
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - np.diag(cm)
    fn = cm.sum(axis=1) - np.diag(cm)
    denom = tp + fp + fn
    return np.where(denom > 0, tp / np.maximum(denom, 1), 1.0)


def miou(preds, gts, num_classes: int = NUM_CLASSES) -> float:
    """Mean IoU over all classes from one global confusion matrix."""
    return float(per_class_iou(confusion_matrix(preds, gts, num_classes)).mean())


@dataclass(frozen=True)
class BeatFiducials:
    """Sample-index fiducials of one beat; optional points may be absent."""

    qrs_onset: int
    qrs_offset: int
    p_onset: int | None = None
    t_offset: int | None = None

    def interval_samples(self, name: str) -> int | None:
        if name == "pr":
            return None if self.p_onset is None else self.qrs_onset - self.p_onset
        if name == "qrs":
            return self.qrs_offset - self.qrs_onset
        if name == "qt":
            return None if self.t_offset is None else self.t_offset - self.qrs_onset
        raise ArgumentError(f"unknown interval {name!r}")


def extract_fiducials(labels, sample_rate: int | None = None) -> list[BeatFiducials]:
    """Beats anchored on maximal QRS runs, in temporal order.

    p_onset is the start of the nearest P run lying entirely between the
    previous QRS run (or the sequence start) and this one; t_offset is the
    end of the first T run before the next QRS run. Either may be absent.
    ``sample_rate`` is accepted for interface symmetry; fiducials are sample
    indices and conversion to ms happens at interval-error time.
    """
    if sample_rate is not None and sample_rate < 1:
        raise ArgumentError("sample_rate must be >= 1")
    runs = to_runs(labels)
    qrs_runs = [(s, e) for s, e, c in runs if c == QRS]
    p_runs = [(s, e) for s, e, c in runs if c == P_WAVE]
    t_runs = [(s, e) for s, e, c in runs if c == T_WAVE]

    beats: list[BeatFiducials] = []
    for k, (qs, qe) in enumerate(qrs_runs):
        prev_qe = qrs_runs[k - 1][1] if k > 0 else 0
        next_qs = qrs_runs[k + 1][0] if k + 1 < len(qrs_runs) else None

        p_onset = None
        for ps, pe in p_runs:
            if ps >= prev_qe and pe <= qs:
                p_onset = ps  # keep the latest such run: nearest to this QRS
            elif ps >= qs:
                break

        t_offset = None
        for ts, te in t_runs:
            if ts >= qe and (next_qs is None or ts < next_qs):
                t_offset = te
                break

        beats.append(BeatFiducials(qs, qe, p_onset, t_offset))
    return beats


def match_beats(pred_beats: list[BeatFiducials], gt_beats: list[BeatFiducials],
                sample_rate: int, match_tol_ms: float = DEFAULT_MATCH_TOL_MS,
                ) -> list[tuple[BeatFiducials, BeatFiducials]]:
    """Greedy one-to-one matching by nearest QRS onset within the tolerance.

    Candidate pairs are taken in order of |onset difference| (ties by gt then
    pred beat index); each beat is used at most once.
    """
    tol_samples = match_tol_ms * sample_rate / 1000.0
    candidates = []
    for gi, gb in enumerate(gt_beats):
        for pi, pb in enumerate(pred_beats):
            d = abs(pb.qrs_onset - gb.qrs_onset)
            if d <= tol_samples:
                candidates.append((d, gi, pi))
    candidates.sort()
    used_g: set[int] = set()
    used_p: set[int] = set()
    matches = []
    for _, gi, pi in candidates:
        if gi in used_g or pi in used_p:
            continue
        used_g.add(gi)
        used_p.add(pi)
        matches.append((pred_beats[pi], gt_beats[gi]))
    matches.sort(key=lambda pair: pair[1].qrs_onset)
    return matches


def interval_abs_errors(matches, sample_rate: int) -> dict[str, list[float]]:
    """Per-interval |pred - gt| in ms over matched beats where both sides
    define the interval."""
    ms_per_sample = 1000.0 / sample_rate
    errors: dict[str, list[float]] = {name: [] for name in INTERVAL_NAMES}
    for pred_beat, gt_beat in matches:
        for name in INTERVAL_NAMES:
            pv = pred_beat.interval_samples(name)
            gv = gt_beat.interval_samples(name)
            if pv is not None and gv is not None:
                errors[name].append(abs(pv - gv) * ms_per_sample)
    return errors


@dataclass(frozen=True)
class IntervalMae:
    """MAE per interval in ms (None when no matched beat defines it)."""

    pr_mae_ms: float | None
    qrs_mae_ms: float | None
    qt_mae_ms: float | None
    avg_mae_ms: float | None
    matched_beats: int
    pr_pairs: int
    qrs_pairs: int
    qt_pairs: int


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def interval_mae_from_errors(errors: dict[str, list[float]], matched: int) -> IntervalMae:
    maes = {name: _mean_or_none(errors[name]) for name in INTERVAL_NAMES}
    defined = [v for v in maes.values() if v is not None]
    return IntervalMae(
        pr_mae_ms=maes["pr"],
        qrs_mae_ms=maes["qrs"],
        qt_mae_ms=maes["qt"],
        avg_mae_ms=float(np.mean(defined)) if defined else None,
        matched_beats=matched,
        pr_pairs=len(errors["pr"]),
        qrs_pairs=len(errors["qrs"]),
        qt_pairs=len(errors["qt"]),
    )


def interval_mae(pred, gt, sample_rate: int,
                 match_tol_ms: float = DEFAULT_MATCH_TOL_MS) -> IntervalMae:
    """PR/QRS/QT mean absolute errors between one prediction and its ground
    truth; the average covers the interval MAEs that are defined."""
    p = as_labels(pred)
    g = as_labels(gt)
    if p.size != g.size:
        raise ArgumentError(f"pred length {p.size} != gt length {g.size}")
    if sample_rate < 1:
        raise ArgumentError("sample_rate must be >= 1")
    matches = match_beats(extract_fiducials(p), extract_fiducials(g),
                          sample_rate, match_tol_ms)
    return interval_mae_from_errors(interval_abs_errors(matches, sample_rate), len(matches))
