"""Brute-force reference implementations used to cross-check the engine.

Everything here recomputes results the slow, obvious way: per-position
counting in plain Python, per-window scoring, and exhaustive argmax with
exact rational comparison. None of it shares the engine's prefix sums,
stacked matrix products, or float prefiltering, so agreement is meaningful.
"""

from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .core import NUM_CLASSES
from .rng import Stream
from .similarity import (
    ABSENT_EXCLUDE,
    ABSENT_ONE,
    WindowScan,
    default_stride,
    enumerate_windows,
    sliding_sim,
)
from .fusion import search_best_key


def pair_counts_ref(a, b, num_classes: int = NUM_CLASSES) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Per-class (intersection, union) counts by direct per-position scan."""
    inter = [0] * num_classes
    union = [0] * num_classes
    for x, y in zip(a, b):
        x = int(x)
        y = int(y)
        if x == y:
            inter[x] += 1
            union[x] += 1
        else:
            union[x] += 1
            union[y] += 1
    return tuple(inter), tuple(union)


def sim_ref(a, b, absent: str = ABSENT_EXCLUDE, num_classes: int = NUM_CLASSES) -> Fraction:
    """Class-averaged IoU as an exact rational."""
    inter, union = pair_counts_ref(a, b, num_classes)
    total = Fraction(0)
    present = 0
    for i, u in zip(inter, union):
        if u:
            total += Fraction(i, u)
            present += 1
        elif absent == ABSENT_ONE:
            total += 1
    if absent == ABSENT_EXCLUDE:
        return total / present
    return total / num_classes


def sliding_counts_ref(query, key_seq, scan: WindowScan,
                       num_classes: int = NUM_CLASSES) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Counts for every window, recomputed from scratch per window."""
    q = list(int(v) for v in query)
    k = list(int(v) for v in key_seq)
    out = []
    for s in scan.starts.tolist():
        out.append(pair_counts_ref(q, k[s:s + scan.width], num_classes))
    return out


def search_ref(query, pool_labels, scan: WindowScan, absent: str = ABSENT_EXCLUDE,
               num_classes: int = NUM_CLASSES) -> tuple[int, int, Fraction]:
    """Exhaustive argmax over (pool index, window start), exact comparison,
    strictly-greater replacement so ties keep the lowest pair."""
    best = None
    for j, labels in enumerate(pool_labels):
        labels = list(int(v) for v in labels)
        for s in scan.starts.tolist():
            score = sim_ref(query, labels[s:s + scan.width], absent, num_classes)
            if best is None or score > best[2]:
                best = (j, s, score)
    return best


def _random_labels(stream: Stream, length: int, num_classes: int = NUM_CLASSES) -> np.ndarray:
    # 2**64 is divisible by 4, so masking is exactly uniform over classes
    return (stream.u64_block(length) & np.uint64(num_classes - 1)).astype(np.int64)


def _random_instance(stream: Stream, max_t: int = 200, max_w: int = 64,
                     max_pool: int = 4):
    t = stream.randint(8, max_t)
    w = stream.randint(1, min(max_w, t))
    if stream.below(2) == 0:
        stride = default_stride(w)
    else:
        stride = stream.randint(1, w)
    scan = enumerate_windows(t, w, stride)
    n_pool = stream.randint(1, max_pool)
    pool = [_random_labels(stream.child(100 + j), t) for j in range(n_pool)]
    # half the time the query is a window copied from the pool, so exact
    # matches and ties actually occur
    if stream.below(2) == 0:
        j = stream.below(n_pool)
        s = int(scan.starts[stream.below(scan.count)])
        query = pool[j][s:s + w].copy()
    else:
        query = _random_labels(stream.child(99), w)
    return query, pool, scan


def check_sliding(trials: int, seed: int) -> list[str]:
    """Engine sliding scores vs per-window recomputation; exact counts."""
    mismatches = []
    root = Stream(seed)
    for trial in range(trials):
        stream = root.child(trial)
        query, pool, scan = _random_instance(stream)
        key = pool[0]
        got = sliding_sim(query, key, scan)
        want = sliding_counts_ref(query, key, scan)
        for s, (score, (inter, union)) in enumerate(zip(got, want)):
            if score.inter != inter or score.union != union:
                mismatches.append(
                    f"sliding trial {trial} window {s}: engine ({score.inter}, "
                    f"{score.union}) != reference ({inter}, {union})"
                )
                break
    return mismatches


def check_search(trials: int, seed: int) -> list[str]:
    """Engine pattern search vs brute-force argmax with lexicographic ties."""
    mismatches = []
    root = Stream(seed)
    for trial in range(trials):
        stream = root.child(trial)
        query, pool, scan = _random_instance(stream)
        j, s_k, score = search_best_key(query, [(lab, None) for lab in pool],
                                        scan, "pattern")
        rj, rs, rscore = search_ref(query, pool, scan)
        if (j, s_k) != (rj, rs) or score.exact() != rscore:
            mismatches.append(
                f"search trial {trial}: engine ({j}, {s_k}, {score.exact()}) "
                f"!= reference ({rj}, {rs}, {rscore})"
            )
    return mismatches


def run_oracle_suite(seed: int, trials: int) -> tuple[list[str], float]:
    """Run both oracle checks; returns (mismatch messages, elapsed seconds)."""
    start = time.perf_counter()
    mismatches = check_sliding(trials, seed)
    mismatches += check_search(trials, seed ^ 0x5EED)
    return mismatches, time.perf_counter() - start
