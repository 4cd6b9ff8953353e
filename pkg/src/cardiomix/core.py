"""Shared data model: ECG records, per-timestep wave labels, the run-length
label codec, and teacher probability maps.

Conventions used across the package:

* label sequences are 1-D ``int64`` arrays over ``{0=BG, 1=P, 2=QRS, 3=T}``;
* run lists are ``(start, end_exclusive, class_id)`` tuples that tile
  ``[0, T)`` without gaps or overlaps;
* every interval anywhere in the package is 0-based and half-open.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NUM_CLASSES = 4
BG, P_WAVE, QRS, T_WAVE = 0, 1, 2, 3
CLASS_NAMES = ("BG", "P", "QRS", "T")

Run = tuple[int, int, int]


class ArgumentError(ValueError):
    """An argument is out of range or inconsistent with its companions."""


class DataFormatError(ValueError):
    """On-disk data or a decoded structure violates the format contract."""


@dataclass(frozen=True)
class EcgRecord:
    """Single-lead voltage trace with its sample rate and identity metadata."""

    record_id: str
    lead_id: str
    sample_rate: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        if samples.ndim != 1 or samples.size < 1:
            raise ArgumentError(
                f"record {self.record_id}: samples must be a non-empty 1-D array"
            )
        if self.sample_rate < 1:
            raise ArgumentError(f"record {self.record_id}: sample_rate must be >= 1")
        if not np.all(np.isfinite(samples)):
            raise ArgumentError(f"record {self.record_id}: samples contain non-finite values")

    @property
    def length(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples: np.ndarray, sample_rate: int | None = None) -> "EcgRecord":
        """Copy of this record with new samples (and optionally a new rate)."""
        rate = self.sample_rate if sample_rate is None else int(sample_rate)
        return EcgRecord(self.record_id, self.lead_id, rate, samples)


@dataclass(frozen=True)
class Window:
    """Half-open index interval ``[start, start + width)``."""

    start: int
    width: int

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ArgumentError("window width must be >= 1")
        if self.start < 0:
            raise ArgumentError("window start must be >= 0")

    @property
    def end(self) -> int:
        return self.start + self.width

    def check_within(self, length: int) -> None:
        if self.end > length:
            raise ArgumentError(
                f"window [{self.start}, {self.end}) exceeds sequence length {length}"
            )


def as_labels(values, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Validate a label sequence and normalize it to a 1-D int64 array."""
    arr = np.ascontiguousarray(values, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1:
        raise ArgumentError("label sequence must be a non-empty 1-D array")
    if int(arr.min()) < 0 or int(arr.max()) >= num_classes:
        bad = int(np.flatnonzero((arr < 0) | (arr >= num_classes))[0])
        raise ArgumentError(
            f"label {int(arr[bad])} at index {bad} is outside [0, {num_classes})"
        )
    return arr


def as_probability_map(values, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Validate a per-timestep class distribution of shape (T, C).

    Rows must sum to 1 within 1e-6 and entries must lie in [0, 1].
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != num_classes:
        raise ArgumentError(f"probability map must have shape (T, {num_classes})")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError("probability map contains non-finite values")
    if float(arr.min()) < -1e-9 or float(arr.max()) > 1.0 + 1e-9:
        raise ArgumentError("probability map entries must lie in [0, 1]")
    sums = arr.sum(axis=1)
    off = np.abs(sums - 1.0)
    if float(off.max()) > 1e-6:
        t = int(off.argmax())
        raise ArgumentError(f"probability row {t} sums to {sums[t]:.8f}, expected 1")
    return arr


def to_runs(dense) -> list[Run]:
    """Minimal run-length encoding of a dense label sequence.

    Adjacent runs always carry different class ids; the runs tile [0, T).
    """
    arr = as_labels(dense)
    change = np.flatnonzero(arr[1:] != arr[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [arr.size]))
    return [(int(s), int(e), int(arr[s])) for s, e in zip(starts, ends)]


def to_dense(runs, length: int, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Expand a run list that tiles ``[0, length)`` into a dense sequence.

    Raises DataFormatError naming the first offending run on any gap,
    overlap, out-of-range class, or coverage mismatch.
    """
    if length < 1:
        raise DataFormatError("empty sequence: length must be >= 1")
    runs = list(runs)
    if not runs:
        raise DataFormatError("run 0: gap at index 0 (no runs)")
    out = np.empty(length, dtype=np.int64)
    prev_end = 0
    for idx, (start, end, class_id) in enumerate(runs):
        if class_id < 0 or class_id >= num_classes:
            raise DataFormatError(f"run {idx}: class id {class_id} outside [0, {num_classes})")
        if end <= start:
            raise DataFormatError(f"run {idx}: empty or inverted interval [{start}, {end})")
        if start > prev_end:
            raise DataFormatError(f"run {idx}: gap at index {prev_end}")
        if start < prev_end:
            raise DataFormatError(f"run {idx}: overlaps previous run at index {start}")
        if end > length:
            raise DataFormatError(f"run {idx}: end {end} exceeds declared length {length}")
        out[start:end] = class_id
        prev_end = end
    if prev_end != length:
        raise DataFormatError(
            f"run {len(runs) - 1}: coverage ends at {prev_end}, expected {length}"
        )
    return out


def argmax_labels(probs, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Per-timestep class with the highest probability; ties go to the lowest id."""
    arr = as_probability_map(probs, num_classes)
    return np.argmax(arr, axis=1).astype(np.int64)


def labels_from_string(text: str) -> np.ndarray:
    """Parse a compact digit string like ``"00122"`` into a label sequence."""
    if not text:
        raise ArgumentError("label string must be non-empty")
    return as_labels([int(ch) for ch in text])


def labels_to_string(labels) -> str:
    """Inverse of :func:`labels_from_string`, for fixtures and debugging."""
    return "".join(str(int(c)) for c in as_labels(labels))
