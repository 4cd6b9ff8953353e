"""Pattern similarity between label segments and its sliding-window evaluation.

Similarity between two equal-width label segments is the class-averaged
intersection-over-union: for each class, count positions where both segments
carry the class (intersection) and where at least one does (union). A class
appearing in neither segment is a 0/0 case; by default such classes are
excluded from the average, since mutual absence carries no pattern evidence.
``absent="one"`` instead scores them 1.0 and divides by the full class count,
for comparison with the plain 1/C formulation.

All counts are exact integers, so scores can be compared exactly and argmax
tie-breaking is platform-independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .core import NUM_CLASSES, ArgumentError, as_labels

ABSENT_EXCLUDE = "exclude"
ABSENT_ONE = "one"
_ABSENT_RULES = (ABSENT_EXCLUDE, ABSENT_ONE)


@dataclass(frozen=True)
class SimScore:
    """Class-averaged IoU with exact per-class integer counts retained."""

    inter: tuple[int, ...]
    union: tuple[int, ...]
    absent_rule: str = ABSENT_EXCLUDE

    def exact(self) -> Fraction:
        """The score as an exact rational."""
        total = Fraction(0)
        present = 0
        for i, u in zip(self.inter, self.union):
            if u:
                total += Fraction(i, u)
                present += 1
            elif self.absent_rule == ABSENT_ONE:
                total += 1
        if self.absent_rule == ABSENT_EXCLUDE:
            return total / present
        return total / len(self.union)

    @property
    def value(self) -> float:
        return float(self.exact())


def _check_absent_rule(absent: str) -> None:
    if absent not in _ABSENT_RULES:
        raise ArgumentError(f"absent rule must be one of {_ABSENT_RULES}, got {absent!r}")


def _pair_counts(a: np.ndarray, b: np.ndarray, num_classes: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    inter = []
    union = []
    for c in range(num_classes):
        in_a = a == c
        in_b = b == c
        inter.append(int(np.count_nonzero(in_a & in_b)))
        union.append(int(np.count_nonzero(in_a | in_b)))
    return tuple(inter), tuple(union)


def iou_class(a, b, class_id: int, num_classes: int = NUM_CLASSES) -> Fraction | None:
    """Per-class IoU of two equal-width label slices.

    Returns None (the "absent" marker) when the class appears in neither
    slice, i.e. the union count is zero.
    """
    x = as_labels(a, num_classes)
    y = as_labels(b, num_classes)
    if x.size != y.size:
        raise ArgumentError(f"slice widths differ: {x.size} vs {y.size}")
    if not 0 <= class_id < num_classes:
        raise ArgumentError(f"class id {class_id} outside [0, {num_classes})")
    in_a = x == class_id
    in_b = y == class_id
    union = int(np.count_nonzero(in_a | in_b))
    if union == 0:
        return None
    return Fraction(int(np.count_nonzero(in_a & in_b)), union)


def sim(a, b, *, absent: str = ABSENT_EXCLUDE, num_classes: int = NUM_CLASSES) -> SimScore:
    """Pattern similarity between two equal-width label slices."""
    _check_absent_rule(absent)
    x = as_labels(a, num_classes)
    y = as_labels(b, num_classes)
    if x.size != y.size:
        raise ArgumentError(f"slice widths differ: {x.size} vs {y.size}")
    inter, union = _pair_counts(x, y, num_classes)
    return SimScore(inter, union, absent)


@dataclass(frozen=True)
class WindowScan:
    """Fixed-width window starts generated at a stride, tail window included."""

    width: int
    stride: int
    starts: np.ndarray

    @property
    def count(self) -> int:
        return int(self.starts.size)

    @cached_property
    def _offsets(self) -> np.ndarray:
        # (num_windows, width) gather indices, shared across keys
        return self.starts[:, None] + np.arange(self.width, dtype=np.int64)[None, :]


def enumerate_windows(length: int, width: int, stride: int) -> WindowScan:
    """All window starts ``{0, stride, 2*stride, ...}`` within [0, length - width],
    with ``length - width`` appended when the lattice misses it, so the scan
    always reaches the end of the sequence."""
    if width < 1:
        raise ArgumentError("window width must be >= 1")
    if width > length:
        raise ArgumentError(f"window width {width} exceeds sequence length {length}")
    if stride < 1:
        raise ArgumentError("stride must be >= 1")
    last = length - width
    starts = np.arange(0, last + 1, stride, dtype=np.int64)
    if int(starts[-1]) != last:
        starts = np.append(starts, np.int64(last))
    starts.setflags(write=False)
    return WindowScan(int(width), int(stride), starts)


def default_stride(width: int) -> int:
    """Stride rule used by the fusion engine: half the window, floor, at least 1."""
    return max(1, width // 2)


def window_matrix(seq: np.ndarray, scan: WindowScan) -> np.ndarray:
    """Stack the scan's windows of ``seq`` into a (num_windows, width) matrix."""
    if int(scan.starts[-1]) + scan.width > seq.size:
        raise ArgumentError(
            f"scan (last start {int(scan.starts[-1])}, width {scan.width}) "
            f"does not fit sequence of length {seq.size}"
        )
    return seq[scan._offsets]


def scan_counts(query: np.ndarray, key_seq: np.ndarray, scan: WindowScan,
                num_classes: int = NUM_CLASSES) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-class (intersection, union) counts for every scan window.

    Window support counts use one bincount over the stacked windows when the
    scan is sparse, or prefix sums over the key's one-hot encoding when
    windows overlap heavily. Intersections come from a single exact 0/1
    matrix product: a position with win[s, t] == query[t] contributes to
    exactly the class query[t]. Returns two (num_classes, num_windows) int64
    arrays.
    """
    n = scan.count
    windows = window_matrix(key_seq, scan)
    classes = np.arange(num_classes, dtype=np.int64)

    if n * scan.width <= key_seq.size * num_classes:
        codes = windows + (classes.size * np.arange(n, dtype=np.int64))[:, None]
        wcount = np.bincount(codes.ravel(), minlength=n * num_classes)
        wcount = wcount.reshape(n, num_classes)                # (S, C)
    else:
        key_onehot = key_seq[:, None] == classes[None, :]      # (T, C)
        csum = np.cumsum(key_onehot, axis=0, dtype=np.int64)
        ends = scan.starts + scan.width
        wcount = csum[ends - 1] - csum[scan.starts] + key_onehot[scan.starts]

    # float64 partial sums of 0/1 values are exact small integers
    q_onehot = (query[:, None] == classes).astype(np.float64)  # (W, C)
    matches = (windows == query[None, :]).astype(np.float64)   # (S, W)
    inter = (matches @ q_onehot).astype(np.int64)              # (S, C)

    qcount = q_onehot.sum(axis=0).astype(np.int64)             # (C,)
    union = qcount[None, :] + wcount - inter                   # (S, C)
    return np.ascontiguousarray(inter.T), np.ascontiguousarray(union.T)


def sliding_sim(query, key_seq, scan: WindowScan, *, absent: str = ABSENT_EXCLUDE,
                num_classes: int = NUM_CLASSES) -> list[SimScore]:
    """One SimScore per scan window, identical to calling :func:`sim` on each
    window of ``key_seq`` against the fixed ``query`` slice."""
    _check_absent_rule(absent)
    q = as_labels(query, num_classes)
    if q.size != scan.width:
        raise ArgumentError(f"query width {q.size} must equal scan width {scan.width}")
    k = as_labels(key_seq, num_classes)
    inters, unions = scan_counts(q, k, scan, num_classes)
    return [
        SimScore(tuple(ic), tuple(uc), absent)
        for ic, uc in zip(inters.T.tolist(), unions.T.tolist())
    ]


def cosine_signal_sim(a, b) -> float:
    """Cosine similarity of two equal-width signal slices; 0.0 if either is zero."""
    x = np.ascontiguousarray(a, dtype=np.float64)
    y = np.ascontiguousarray(b, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ArgumentError("signal slices must be 1-D")
    if x.size != y.size:
        raise ArgumentError(f"slice widths differ: {x.size} vs {y.size}")
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(np.dot(x, y) / (nx * ny))


def scores_from_counts(inters: np.ndarray, unions: np.ndarray, absent: str) -> np.ndarray:
    """Float scores from stacked count arrays of shape (C, ...)."""
    present = unions > 0
    ratio = np.zeros(inters.shape, dtype=np.float64)
    np.divide(inters, unions, out=ratio, where=present)
    if absent == ABSENT_EXCLUDE:
        return ratio.sum(axis=0) / present.sum(axis=0)
    num_classes = inters.shape[0]
    return (ratio.sum(axis=0) + (~present).sum(axis=0)) / num_classes


def exact_score_at(inters: np.ndarray, unions: np.ndarray, index, absent: str) -> Fraction:
    """Exact rational score for one stacked-count column."""
    total = Fraction(0)
    present = 0
    num_classes = inters.shape[0]
    for c in range(num_classes):
        u = int(unions[(c, *index)] if isinstance(index, tuple) else unions[c, index])
        i = int(inters[(c, *index)] if isinstance(index, tuple) else inters[c, index])
        if u:
            total += Fraction(i, u)
            present += 1
        elif absent == ABSENT_ONE:
            total += 1
    if absent == ABSENT_EXCLUDE:
        return total / present
    return total / num_classes
