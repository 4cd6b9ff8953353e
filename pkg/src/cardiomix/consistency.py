"""Cardiac pattern validity: T waves must follow a QRS complex.

A label sequence violates the cardiac cycle wherever a T run appears with no
QRS run since the previous T run (background and P runs are transparent to
the scan). Recordings may legitimately begin mid-beat, so by default the
first non-background wave run of a sequence is exempt; pass
``exempt_first_wave=False`` for the literal rule.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import BG, QRS, T_WAVE, ArgumentError, to_runs

NO_PRECEDING_QRS = "NO_PRECEDING_QRS"


@dataclass(frozen=True)
class Violation:
    """A maximal T run with no QRS since the previous T run."""

    t_start: int
    t_end: int
    reason: str = NO_PRECEDING_QRS


def find_violations(labels, *, exempt_first_wave: bool = True) -> list[Violation]:
    """All cardiac-order violations in one label sequence."""
    out: list[Violation] = []
    qrs_seen = False
    first_wave = True
    for start, end, class_id in to_runs(labels):
        if class_id == BG:
            continue
        if class_id == QRS:
            qrs_seen = True
        elif class_id == T_WAVE:
            if not qrs_seen and not (exempt_first_wave and first_wave):
                out.append(Violation(start, end))
            qrs_seen = False
        first_wave = False
    return out


def consistency_ratio(batch, *, exempt_first_wave: bool = True) -> float:
    """Fraction of sequences in the batch with zero violations."""
    batch = list(batch)
    if not batch:
        raise ArgumentError("consistency ratio needs a non-empty batch")
    clean = sum(
        1 for labels in batch
        if not find_violations(labels, exempt_first_wave=exempt_first_wave)
    )
    return clean / len(batch)
