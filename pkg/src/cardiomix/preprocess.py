"""Signal conditioning chain: duration fix, resampling, band-pass, z-score.

The pipeline brings raw recordings into the regime the fusion engine assumes:
10 seconds at 250 Hz, band-limited to 0.67-40 Hz, zero mean and unit variance.
All filters are Butterworth sections applied forward-backward, so they are
zero-phase and never move wave boundaries in time.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .core import BG, ArgumentError, EcgRecord, as_labels

DEFAULT_RATE = 250
DEFAULT_LO_HZ = 0.67
DEFAULT_HI_HZ = 40.0
DEFAULT_SECONDS = 10.0

# Anti-alias low-pass for downsampling sits just under the new Nyquist.
_ANTIALIAS_FRACTION = 0.45
_ANTIALIAS_ORDER = 4


def resample(rec: EcgRecord, target_rate: int) -> EcgRecord:
    """Resample to ``target_rate``; output length is round(T * target / source).

    Downsampling low-pass filters below the new Nyquist first (zero-phase),
    then takes values by linear interpolation at the new sample instants.
    Equal rates return the record unchanged.
    """
    target_rate = int(target_rate)
    if target_rate < 1:
        raise ArgumentError("target_rate must be >= 1")
    src = rec.sample_rate
    if target_rate == src:
        return rec
    x = rec.samples
    if target_rate < src:
        sos = sps.butter(_ANTIALIAS_ORDER, _ANTIALIAS_FRACTION * target_rate,
                         btype="lowpass", fs=src, output="sos")
        x = sps.sosfiltfilt(sos, x)
    new_len = int(np.floor(x.size * target_rate / src + 0.5))
    pos = resample_positions(x.size, src, target_rate)
    out = np.interp(pos, np.arange(x.size, dtype=np.float64), x)
    assert out.size == new_len
    return rec.with_samples(out, sample_rate=target_rate)


def resample_positions(length: int, src_rate: int, target_rate: int) -> np.ndarray:
    """Source-index positions of the new sample instants."""
    new_len = int(np.floor(length * target_rate / src_rate + 0.5))
    return np.arange(new_len, dtype=np.float64) * (src_rate / target_rate)


def resample_labels(labels: np.ndarray, src_rate: int, target_rate: int) -> np.ndarray:
    """Index-resample labels by nearest input index (half rounds up)."""
    labels = as_labels(labels)
    if target_rate == src_rate:
        return labels
    pos = resample_positions(labels.size, src_rate, target_rate)
    idx = np.minimum(np.floor(pos + 0.5).astype(np.int64), labels.size - 1)
    return labels[idx]


def bandpass(rec: EcgRecord, lo: float = DEFAULT_LO_HZ, hi: float = DEFAULT_HI_HZ) -> EcgRecord:
    """Zero-phase band-pass: 2nd-order Butterworth high-pass at ``lo`` cascaded
    with a 2nd-order low-pass at ``hi``, each applied forward-backward."""
    nyquist = rec.sample_rate / 2.0
    if not 0.0 < lo < hi:
        raise ArgumentError(f"band edges must satisfy 0 < lo < hi, got {lo}, {hi}")
    if hi >= nyquist:
        raise ArgumentError(f"high edge {hi} Hz must be below Nyquist {nyquist} Hz")
    hp = sps.butter(2, lo, btype="highpass", fs=rec.sample_rate, output="sos")
    lp = sps.butter(2, hi, btype="lowpass", fs=rec.sample_rate, output="sos")
    x = sps.sosfiltfilt(hp, rec.samples)
    x = sps.sosfiltfilt(lp, x)
    return rec.with_samples(x)


def zscore(rec: EcgRecord) -> EcgRecord:
    """Normalize to zero mean, unit population std; flat signals become all-zero."""
    x = rec.samples
    mu = float(x.mean())
    sigma = float(x.std())
    if sigma == 0.0:
        return rec.with_samples(np.zeros_like(x))
    return rec.with_samples((x - mu) / sigma)


def fix_duration(rec: EcgRecord, labels: np.ndarray | None = None,
                 seconds: float = DEFAULT_SECONDS) -> tuple[EcgRecord, np.ndarray | None]:
    """Crop or pad to exactly ``seconds`` at the record's own rate.

    Longer inputs keep the head ``[0, target)``; shorter inputs are padded on
    the right with zeros (signal) and background (labels).
    """
    if seconds <= 0:
        raise ArgumentError("seconds must be positive")
    if labels is not None:
        labels = as_labels(labels)
        if labels.size != rec.length:
            raise ArgumentError(
                f"record {rec.record_id}: labels length {labels.size} "
                f"!= signal length {rec.length}"
            )
    target = int(round(seconds * rec.sample_rate))
    t = rec.length
    if t == target:
        return rec, labels
    if t > target:
        out = rec.with_samples(rec.samples[:target])
        return out, None if labels is None else labels[:target]
    pad = target - t
    out = rec.with_samples(np.concatenate([rec.samples, np.zeros(pad)]))
    if labels is None:
        return out, None
    return out, np.concatenate([labels, np.full(pad, BG, dtype=np.int64)])


def preprocess_pipeline(rec: EcgRecord, labels: np.ndarray | None = None, *,
                        target_rate: int = DEFAULT_RATE, lo: float = DEFAULT_LO_HZ,
                        hi: float = DEFAULT_HI_HZ, seconds: float = DEFAULT_SECONDS,
                        ) -> tuple[EcgRecord, np.ndarray | None]:
    """Duration fix, resample, band-pass, z-score, in that order.

    Labels ride through the duration fix and are index-resampled alongside the
    signal; filtering and normalization do not touch them.
    """
    rec2, labels2 = fix_duration(rec, labels, seconds=seconds)
    src = rec2.sample_rate
    rec2 = resample(rec2, target_rate)
    if labels2 is not None:
        labels2 = resample_labels(labels2, src, target_rate)
    rec2 = bandpass(rec2, lo, hi)
    rec2 = zscore(rec2)
    return rec2, labels2
