"""Bidirectional pattern-guided splice operators and their ablation baselines.

Two directions of segment exchange between a labeled and an unlabeled batch:

* labeled-to-unlabeled (L2U): each unlabeled sample gets a window replaced by
  the best-matching window from the labeled pool, and its pseudo-labels get
  the key's ground truth pasted in;
* unlabeled-to-labeled (U2L): each labeled sample gets a window replaced by
  the best-matching pseudo-labeled window, but only when the teacher's mean
  top-probability over that window strictly exceeds the confidence threshold.

Key windows are ranked by class-averaged label IoU ("pattern"), raw-signal
cosine ("signal"), or drawn uniformly ("random"). The window width is drawn
once per mini-batch; every per-sample draw comes from a keyed substream, so
results are independent of evaluation order and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import NUM_CLASSES, ArgumentError, as_labels, as_probability_map
from .rng import Stream
from .similarity import (
    ABSENT_EXCLUDE,
    SimScore,
    WindowScan,
    default_stride,
    enumerate_windows,
    exact_score_at,
    scores_from_counts,
    sim,
    window_matrix,
)

CRITERIA = ("pattern", "signal", "random")
DIRECTIONS = ("l2u", "u2l", "bidirectional", "vanilla")

# Substream indices under one step stream (see docs/FORMAT.md).
_L2U_STREAM = 1
_U2L_STREAM = 2

# Candidate windows within this float margin of the max are re-ranked exactly.
_PREFILTER_EPS = 1e-9

# Per-timestep maxima of a valid C=4 map are >= ~0.25, so they are integer
# multiples of 2**-55 and window confidence can be averaged exactly.
_CONF_SCALE_BITS = 55


@dataclass(frozen=True)
class FusionParams:
    """Engine parameters; defaults follow the reference operating point."""

    w_min: int = 250
    w_max: int = 1250
    tau: float = 0.8
    criterion: str = "pattern"
    direction: str = "bidirectional"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.w_min <= self.w_max:
            raise ArgumentError(f"window range [{self.w_min}, {self.w_max}] is invalid")
        if not 0.0 <= self.tau <= 1.0:
            raise ArgumentError(f"tau must lie in [0, 1], got {self.tau}")
        if self.criterion not in CRITERIA:
            raise ArgumentError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.direction not in DIRECTIONS:
            raise ArgumentError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


@dataclass(frozen=True)
class FusionOutcome:
    """One fused sample plus full provenance of the splice decision."""

    fused_signal: np.ndarray
    fused_labels: np.ndarray
    target_index: int
    query_start: int
    source_index: int
    key_start: int
    width: int
    score: float
    confidence: float | None = None
    gated: bool | None = None


@dataclass(frozen=True)
class StepResult:
    """Both augmented batches of one engine step, plus all outcomes."""

    width: int
    l2u: list[FusionOutcome]
    u2l: list[FusionOutcome]

    @property
    def augmented_unlabeled(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(o.fused_signal, o.fused_labels) for o in self.l2u]

    @property
    def augmented_labeled(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(o.fused_signal, o.fused_labels) for o in self.u2l]


def splice(target_signal, target_labels, source_signal, source_labels,
           s_q: int, s_k: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Copy the source window ``[s_k, s_k+width)`` over the target window
    ``[s_q, s_q+width)``; everything else is the target, untouched.

    Pure copy: no blending or boundary smoothing.
    """
    tx = np.ascontiguousarray(target_signal, dtype=np.float64)
    sx = np.ascontiguousarray(source_signal, dtype=np.float64)
    ty = as_labels(target_labels)
    sy = as_labels(source_labels)
    if tx.size != ty.size or sx.size != sy.size or tx.size != sx.size:
        raise ArgumentError("splice operands must all have the same length")
    if width < 1 or s_q < 0 or s_k < 0 or s_q + width > tx.size or s_k + width > sx.size:
        raise ArgumentError(
            f"splice windows out of bounds: s_q={s_q}, s_k={s_k}, width={width}, T={tx.size}"
        )
    out_x = tx.copy()
    out_y = ty.copy()
    out_x[s_q:s_q + width] = sx[s_k:s_k + width]
    out_y[s_q:s_q + width] = sy[s_k:s_k + width]
    return out_x, out_y


def segment_confidence(probs, start: int, width: int,
                       num_classes: int = NUM_CLASSES) -> float:
    """Mean of the per-timestep maximum probability over ``[start, start+width)``.

    Computed in exact arithmetic, so a window of constant maxima q yields
    exactly q and strict threshold comparisons behave predictably.
    """
    return _segment_confidence_checked(as_probability_map(probs, num_classes),
                                       start, width)


def _segment_confidence_checked(p: np.ndarray, start: int, width: int) -> float:
    # p must already be a validated map; only the window is checked here
    if start < 0 or width < 1 or start + width > p.shape[0]:
        raise ArgumentError(
            f"confidence window [{start}, {start + width}) out of bounds for T={p.shape[0]}"
        )
    maxima = p[start:start + width].max(axis=1)
    scaled = maxima * float(1 << _CONF_SCALE_BITS)
    ints = scaled.astype(np.int64)
    if np.all(ints.astype(np.float64) == scaled):
        total = sum(ints.tolist())
        return float(Fraction(total, width << _CONF_SCALE_BITS))
    # values below 2**-3 cannot occur for normalized maps; keep a safe fallback
    total_fr = sum(Fraction(float(v)) for v in maxima)
    return float(total_fr / width)


def _argmax_validated(p: np.ndarray) -> np.ndarray:
    # argmax of an already-validated map; np.argmax ties go to the lowest id
    return np.argmax(p, axis=1).astype(np.int64)


def _as_batch(batch, kind: str, num_classes: int):
    """Normalize a batch of (signal, labels) or (signal, probs) pairs."""
    if not batch:
        raise ArgumentError(f"{kind} batch must be non-empty")
    signals = []
    companions = []
    for i, (sig, comp) in enumerate(batch):
        x = np.ascontiguousarray(sig, dtype=np.float64)
        if x.ndim != 1 or x.size < 1:
            raise ArgumentError(f"{kind} sample {i}: signal must be a non-empty 1-D array")
        if kind == "labeled":
            c = as_labels(comp, num_classes)
            if c.size != x.size:
                raise ArgumentError(f"{kind} sample {i}: labels length != signal length")
        else:
            c = as_probability_map(comp, num_classes)
            if c.shape[0] != x.size:
                raise ArgumentError(f"{kind} sample {i}: probability map length != signal length")
        signals.append(x)
        companions.append(c)
    return signals, companions


def _common_length(*signal_lists) -> int:
    lengths = {x.size for signals in signal_lists for x in signals}
    if len(lengths) != 1:
        raise ArgumentError(f"all sequences must share one length, got {sorted(lengths)}")
    return lengths.pop()


def _check_width(width: int, t: int) -> None:
    if not 1 <= width <= t:
        raise ArgumentError(f"window width {width} outside [1, {t}]")


def _draw_width(params: FusionParams, rng: Stream, t: int) -> int:
    if params.w_max > t:
        raise ArgumentError(f"window range [{params.w_min}, {params.w_max}] exceeds length {t}")
    return rng.randint(params.w_min, params.w_max)


def _parallel_map(fn, n: int, threads: int) -> list:
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _stack_pool_windows(pool_labels: list[np.ndarray], scan: WindowScan) -> np.ndarray:
    return np.concatenate([window_matrix(lab, scan) for lab in pool_labels], axis=0)


def _pattern_counts(stacked_windows: np.ndarray, queries: np.ndarray,
                    num_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact (C, num_windows, num_queries) intersection/union counts."""
    m = stacked_windows.shape[0]
    nq = queries.shape[0]
    inters = np.empty((num_classes, m, nq), dtype=np.int64)
    unions = np.empty((num_classes, m, nq), dtype=np.int64)
    for c in range(num_classes):
        k_c = (stacked_windows == c).astype(np.float64)
        q_c = (queries == c).astype(np.float64)
        inter = (k_c @ q_c.T).astype(np.int64)
        wcount = k_c.sum(axis=1).astype(np.int64)
        qcount = q_c.sum(axis=1).astype(np.int64)
        inters[c] = inter
        unions[c] = wcount[:, None] + qcount[None, :] - inter
    return inters, unions


def _argmax_exact(scores_col: np.ndarray, inters: np.ndarray, unions: np.ndarray,
                  q: int, absent: str) -> tuple[int, Fraction]:
    """Flat argmax with exact re-ranking of float near-ties.

    Candidates are visited in ascending flat index, which is (pool index,
    window start) lexicographic order, so exact ties keep the lowest pair.
    """
    best_float = float(scores_col.max())
    candidates = np.flatnonzero(scores_col >= best_float - _PREFILTER_EPS)
    best_idx = -1
    best_exact: Fraction | None = None
    for w in candidates.tolist():
        fr = exact_score_at(inters[:, :, q], unions[:, :, q], w, absent)
        if best_exact is None or fr > best_exact:
            best_exact = fr
            best_idx = w
    return best_idx, best_exact


def _pattern_search_many(queries: np.ndarray, pool_labels: list[np.ndarray],
                         scan: WindowScan, absent: str, num_classes: int,
                         ) -> list[tuple[int, int, SimScore]]:
    stacked = _stack_pool_windows(pool_labels, scan)
    inters, unions = _pattern_counts(stacked, queries, num_classes)
    scores = scores_from_counts(inters, unions, absent)
    n_starts = scan.count
    out = []
    for q in range(queries.shape[0]):
        w, _ = _argmax_exact(scores[:, q], inters, unions, q, absent)
        j, s_idx = divmod(w, n_starts)
        score = SimScore(tuple(int(v) for v in inters[:, w, q]),
                         tuple(int(v) for v in unions[:, w, q]), absent)
        out.append((j, int(scan.starts[s_idx]), score))
    return out


def _signal_search_many(query_signals: np.ndarray, pool_signals: list[np.ndarray],
                        scan: WindowScan) -> list[tuple[int, int, float]]:
    stacked = np.concatenate([window_matrix(x, scan) for x in pool_signals], axis=0)
    norms = np.sqrt((stacked * stacked).sum(axis=1))
    dots = stacked @ query_signals.T  # (num_windows, num_queries)
    qnorms = np.sqrt((query_signals * query_signals).sum(axis=1))
    denom = norms[:, None] * qnorms[None, :]
    cos = np.zeros_like(dots)
    np.divide(dots, denom, out=cos, where=denom > 0.0)
    n_starts = scan.count
    out = []
    for q in range(query_signals.shape[0]):
        w = int(np.argmax(cos[:, q]))  # first max = lexicographic tie rule
        j, s_idx = divmod(w, n_starts)
        out.append((j, int(scan.starts[s_idx]), float(cos[w, q])))
    return out


def search_best_key(query_labels, pool, scan: WindowScan, criterion: str, *,
                    query_signal=None, rng: Stream | None = None,
                    absent: str = ABSENT_EXCLUDE, num_classes: int = NUM_CLASSES):
    """Best (pool index, window start, score) for one query slice.

    ``pool`` is a sequence of (labels, signal_or_None) pairs; every pool
    sequence must be at least as long as the scan requires. Ties break to the
    lowest (index, start). ``criterion="random"`` draws the window uniformly
    from the scan using ``rng`` and reports the drawn window's pattern score.
    """
    if criterion not in CRITERIA:
        raise ArgumentError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    if not pool:
        raise ArgumentError("search pool must be non-empty")
    q = as_labels(query_labels, num_classes)
    if q.size != scan.width:
        raise ArgumentError(f"query width {q.size} must equal scan width {scan.width}")
    pool_labels = [as_labels(lab, num_classes) for lab, _ in pool]
    for j, lab in enumerate(pool_labels):
        if lab.size < scan.width:
            raise ArgumentError(f"pool sequence {j} shorter than window width {scan.width}")

    if criterion == "pattern":
        [(j, s_k, score)] = _pattern_search_many(q[None, :], pool_labels, scan,
                                                 absent, num_classes)
        return j, s_k, score
    if criterion == "signal":
        if query_signal is None or any(sig is None for _, sig in pool):
            raise ArgumentError("criterion 'signal' requires query and pool signals")
        qs = np.ascontiguousarray(query_signal, dtype=np.float64)
        if qs.size != scan.width:
            raise ArgumentError("query signal width must equal scan width")
        pool_signals = [np.ascontiguousarray(sig, dtype=np.float64) for _, sig in pool]
        [(j, s_k, score)] = _signal_search_many(qs[None, :], pool_signals, scan)
        return j, s_k, score
    if rng is None:
        raise ArgumentError("criterion 'random' requires an rng stream")
    total = len(pool) * scan.count
    idx = rng.below(total)
    j, s_idx = divmod(idx, scan.count)
    s_k = int(scan.starts[s_idx])
    score = sim(q, pool_labels[j][s_k:s_k + scan.width], absent=absent,
                num_classes=num_classes)
    return j, s_k, score


def _score_value(score) -> float:
    return score.value if isinstance(score, SimScore) else float(score)


def _run_direction(target_signals, target_labels, source_signals, source_labels,
                   params: FusionParams, rng: Stream, width: int, threads: int,
                   confidence_maps=None) -> list[FusionOutcome]:
    """Shared body of both fusion directions.

    Targets are spliced from sources; when ``confidence_maps`` is given (U2L),
    the splice is gated on the winning key window's confidence.
    """
    t = _common_length(target_signals, source_signals)
    _check_width(width, t)
    scan = enumerate_windows(t, width, default_stride(width))
    n = len(target_signals)
    streams = [rng.child(i) for i in range(n)]
    s_qs = [st.randint(0, t - width) for st in streams]

    if params.criterion == "pattern":
        queries = np.stack([target_labels[i][s_qs[i]:s_qs[i] + width] for i in range(n)])
        picks = _pattern_search_many(queries, source_labels, scan,
                                     ABSENT_EXCLUDE, NUM_CLASSES)
    elif params.criterion == "signal":
        queries = np.stack([target_signals[i][s_qs[i]:s_qs[i] + width] for i in range(n)])
        picks = _signal_search_many(queries, source_signals, scan)
    else:
        picks = []
        for i in range(n):
            pool = [(lab, None) for lab in source_labels]
            picks.append(search_best_key(
                target_labels[i][s_qs[i]:s_qs[i] + width], pool, scan, "random",
                rng=streams[i]))

    def build(i: int) -> FusionOutcome:
        j, s_k, score = picks[i]
        s_q = s_qs[i]
        confidence = None
        gated = None
        if confidence_maps is not None:
            confidence = _segment_confidence_checked(confidence_maps[j], s_k, width)
            gated = confidence > params.tau
        if gated is False:
            fused_x = target_signals[i].copy()
            fused_y = target_labels[i].copy()
        else:
            fused_x, fused_y = splice(target_signals[i], target_labels[i],
                                      source_signals[j], source_labels[j],
                                      s_q, s_k, width)
        return FusionOutcome(fused_x, fused_y, i, s_q, j, s_k, width,
                             _score_value(score), confidence, gated)

    return _parallel_map(build, n, threads)


def fuse_l2u(unlabeled_batch, labeled_batch, params: FusionParams, rng: Stream, *,
             width: int | None = None, threads: int = 1) -> list[FusionOutcome]:
    """Labeled-to-unlabeled fusion over one mini-batch.

    For each unlabeled sample: pseudo-labels are the argmax of its map, a
    query start is drawn, the labeled pool is searched with the configured
    criterion, and the winning key window (signal and ground-truth labels) is
    spliced in. One window width is drawn per mini-batch unless given.
    """
    u_signals, u_probs = _as_batch(unlabeled_batch, "unlabeled", NUM_CLASSES)
    l_signals, l_labels = _as_batch(labeled_batch, "labeled", NUM_CLASSES)
    t = _common_length(u_signals, l_signals)
    if width is None:
        width = _draw_width(params, rng, t)
    pseudo = [_argmax_validated(p) for p in u_probs]
    return _run_direction(u_signals, pseudo, l_signals, l_labels,
                          params, rng, width, threads)


def fuse_u2l(labeled_batch, unlabeled_batch, params: FusionParams, rng: Stream, *,
             width: int | None = None, threads: int = 1) -> list[FusionOutcome]:
    """Unlabeled-to-labeled fusion with confidence gating.

    The key search runs over the unlabeled pool's pseudo-labels; the splice
    only happens when the mean top-probability of the winning window strictly
    exceeds ``params.tau``, otherwise the original pair is returned with
    ``gated=False``.
    """
    l_signals, l_labels = _as_batch(labeled_batch, "labeled", NUM_CLASSES)
    u_signals, u_probs = _as_batch(unlabeled_batch, "unlabeled", NUM_CLASSES)
    t = _common_length(l_signals, u_signals)
    if width is None:
        width = _draw_width(params, rng, t)
    pseudo = [_argmax_validated(p) for p in u_probs]
    return _run_direction(l_signals, l_labels, u_signals, pseudo,
                          params, rng, width, threads, confidence_maps=u_probs)


def cardiomix_step(labeled_batch, unlabeled_batch, params: FusionParams, rng: Stream,
                   *, threads: int = 1) -> StepResult:
    """One bidirectional step: L2U then gated U2L with a single shared width.

    Equivalent to drawing the width from ``rng``, then running fuse_l2u with
    substream 1 and fuse_u2l with substream 2.
    """
    if not labeled_batch or not unlabeled_batch:
        raise ArgumentError("both batches must be non-empty")
    # full validation happens inside each direction; only the length is needed here
    lengths = {np.asarray(sig).shape[0] for sig, _ in [*labeled_batch, *unlabeled_batch]}
    if len(lengths) != 1:
        raise ArgumentError(f"all sequences must share one length, got {sorted(lengths)}")
    width = _draw_width(params, rng, lengths.pop())
    l2u = fuse_l2u(unlabeled_batch, labeled_batch, params, rng.child(_L2U_STREAM),
                   width=width, threads=threads)
    u2l = fuse_u2l(labeled_batch, unlabeled_batch, params, rng.child(_U2L_STREAM),
                   width=width, threads=threads)
    return StepResult(width, l2u, u2l)


def vanilla_cutmix(unlabeled_batch, params: FusionParams, rng: Stream, *,
                   width: int | None = None, threads: int = 1) -> list[FusionOutcome]:
    """Plain CutMix within the unlabeled batch: each sample takes a window
    from a random partner at the same position (s_q = s_k)."""
    u_signals, u_probs = _as_batch(unlabeled_batch, "unlabeled", NUM_CLASSES)
    n = len(u_signals)
    if n < 2:
        raise ArgumentError("vanilla cutmix needs at least 2 unlabeled samples")
    t = _common_length(u_signals)
    if width is None:
        width = _draw_width(params, rng, t)
    _check_width(width, t)
    pseudo = [_argmax_validated(p) for p in u_probs]

    draws = []
    for i in range(n):
        st = rng.child(i)
        partner = st.below(n - 1)
        if partner >= i:
            partner += 1
        draws.append((partner, st.randint(0, t - width)))

    def build(i: int) -> FusionOutcome:
        j, s = draws[i]
        fused_x, fused_y = splice(u_signals[i], pseudo[i], u_signals[j], pseudo[j],
                                  s, s, width)
        score = sim(pseudo[i][s:s + width], pseudo[j][s:s + width])
        return FusionOutcome(fused_x, fused_y, i, s, j, s, width, score.value)

    return _parallel_map(build, n, threads)
