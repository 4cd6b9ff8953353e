"""On-disk dataset format, synthetic ECG generation, and the pseudo-label
simulator that stands in for a teacher model at desk scale.

File formats (full grammar in docs/FORMAT.md):

* signals: raw little-endian float32;
* labels: run CSV ``start,end_exclusive,class_id`` with a header, runs tiling
  the sequence exactly;
* probability maps: raw little-endian float32, row-major (T, C);
* manifest: UTF-8 JSON with a ``format_version`` and a record list.

Save/load pairs are bit-exact inverses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .consistency import find_violations
from .core import (
    NUM_CLASSES,
    P_WAVE,
    QRS,
    T_WAVE,
    ArgumentError,
    DataFormatError,
    EcgRecord,
    as_labels,
    as_probability_map,
    to_dense,
    to_runs,
)
from .rng import Stream

FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")

LABELS_HEADER = "start,end_exclusive,class_id"


# ---------------------------------------------------------------------------
# per-file codecs


def save_signal(path: Path, samples: np.ndarray) -> None:
    Path(path).write_bytes(np.ascontiguousarray(samples, dtype="<f4").tobytes())


def load_signal(path: Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) == 0 or len(raw) % 4 != 0:
        raise DataFormatError(f"{path}: signal byte size {len(raw)} is not a "
                              f"positive multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


def save_labels(path: Path, labels) -> None:
    lines = [LABELS_HEADER]
    lines += [f"{s},{e},{c}" for s, e, c in to_runs(labels)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_labels(path: Path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines or lines[0] != LABELS_HEADER:
        raise DataFormatError(f"{path}: missing labels header '{LABELS_HEADER}'")
    runs = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise DataFormatError(f"{path}:{ln_no}: expected 3 comma-separated fields")
        try:
            runs.append((int(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{ln_no}: non-integer field") from exc
    if not runs:
        raise DataFormatError(f"{path}: empty sequence (no runs)")
    length = runs[-1][1]
    try:
        return to_dense(runs, length)
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_probs(path: Path, probs: np.ndarray) -> None:
    arr = np.ascontiguousarray(probs, dtype="<f4")
    if arr.ndim != 2:
        raise ArgumentError("probability map must be 2-D")
    Path(path).write_bytes(arr.tobytes())


def load_probs(path: Path, num_classes: int = NUM_CLASSES) -> np.ndarray:
    raw = Path(path).read_bytes()
    width = 4 * num_classes
    if len(raw) == 0 or len(raw) % width != 0:
        raise DataFormatError(
            f"{path}: probability byte size {len(raw)} is not a positive "
            f"multiple of {width} (4 bytes x {num_classes} classes)"
        )
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    arr = flat.reshape(-1, num_classes)
    try:
        return as_probability_map(arr, num_classes)
    except ArgumentError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_record(signal_path: Path, samples, labels_path: Path | None = None,
                labels=None, probs_path: Path | None = None, probs=None) -> None:
    """Write one record triple; labels/probs only when their paths are given."""
    save_signal(signal_path, samples)
    if labels_path is not None:
        if labels is None:
            raise ArgumentError("labels_path given without labels")
        save_labels(labels_path, labels)
    if probs_path is not None:
        if probs is None:
            raise ArgumentError("probs_path given without probabilities")
        save_probs(probs_path, probs)


def load_record(signal_path: Path, labels_path: Path | None = None,
                probs_path: Path | None = None,
                ) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Load one record triple (signal, labels or None, probs or None)."""
    samples = load_signal(signal_path)
    labels = load_labels(labels_path) if labels_path is not None else None
    probs = load_probs(probs_path) if probs_path is not None else None
    if labels is not None and labels.size != samples.size:
        raise DataFormatError(
            f"{labels_path}: labels length {labels.size} != signal length {samples.size}")
    if probs is not None and probs.shape[0] != samples.size:
        raise DataFormatError(
            f"{probs_path}: probability length {probs.shape[0]} != signal length "
            f"{samples.size}")
    return samples, labels, probs


# ---------------------------------------------------------------------------
# dataset manifest


@dataclass
class DatasetRecord:
    """One loaded record: signal plus optional labels and teacher map."""

    record: EcgRecord
    labels: np.ndarray | None = None
    probs: np.ndarray | None = None
    split: str = "train"
    labeled: bool = True


@dataclass
class Dataset:
    records: list[DatasetRecord] = field(default_factory=list)

    def labeled_records(self) -> list[DatasetRecord]:
        return [r for r in self.records if r.labeled]

    def unlabeled_records(self) -> list[DatasetRecord]:
        return [r for r in self.records if not r.labeled]


def _record_stem(rec: DatasetRecord) -> str:
    return f"{rec.record.record_id}__{rec.record.lead_id}"


def save_dataset(dataset: Dataset, out_dir: Path) -> Path:
    """Write records and a canonical manifest under ``out_dir``.

    Layout: ``manifest.json`` plus ``data/<record_id>__<lead_id>.{f32,runs.csv,probs.f32}``.
    Serialization is byte-stable: re-saving a loaded dataset reproduces it.
    """
    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    seen: set[str] = set()
    for rec in dataset.records:
        stem = _record_stem(rec)
        if stem in seen:
            raise ArgumentError(f"duplicate record identity {stem}")
        seen.add(stem)
        entry = {
            "record_id": rec.record.record_id,
            "lead_id": rec.record.lead_id,
            "sample_rate": rec.record.sample_rate,
            "signal_path": f"data/{stem}.f32",
            "split": rec.split,
            "labeled": rec.labeled,
        }
        save_signal(data_dir / f"{stem}.f32", rec.record.samples)
        if rec.labels is not None:
            entry["labels_path"] = f"data/{stem}.runs.csv"
            save_labels(data_dir / f"{stem}.runs.csv", rec.labels)
        if rec.probs is not None:
            entry["probs_path"] = f"data/{stem}.probs.f32"
            save_probs(data_dir / f"{stem}.probs.f32", rec.probs)
        entries.append(entry)
    manifest = {"format_version": FORMAT_VERSION, "records": entries}
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_dataset(manifest_path: Path) -> Dataset:
    """Load and validate every record referenced by a manifest.

    Paths resolve relative to the manifest's directory. Every error message
    names the offending record.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: invalid JSON: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DataFormatError(
            f"{manifest_path}: unsupported format_version {version!r} "
            f"(expected {FORMAT_VERSION})"
        )
    base = manifest_path.parent
    records = []
    for i, entry in enumerate(manifest.get("records", [])):
        rid = entry.get("record_id", f"<record {i}>")
        try:
            lead = entry["lead_id"]
            rate = int(entry["sample_rate"])
            split = entry.get("split", "train")
            labeled = bool(entry.get("labeled", False))
            if split not in SPLITS:
                raise DataFormatError(f"split must be one of {SPLITS}, got {split!r}")
            sig_path = base / entry["signal_path"]
            if not sig_path.exists():
                raise DataFormatError(f"missing signal file {sig_path}")
            samples = load_signal(sig_path)
            record = EcgRecord(rid, lead, rate, samples)
            labels = None
            if "labels_path" in entry:
                lab_path = base / entry["labels_path"]
                if not lab_path.exists():
                    raise DataFormatError(f"missing labels file {lab_path}")
                labels = load_labels(lab_path)
                if labels.size != record.length:
                    raise DataFormatError(
                        f"labels length {labels.size} != signal length {record.length}"
                    )
            elif labeled:
                raise DataFormatError("labeled record without labels_path")
            probs = None
            if "probs_path" in entry:
                probs_path = base / entry["probs_path"]
                if not probs_path.exists():
                    raise DataFormatError(f"missing probability file {probs_path}")
                probs = load_probs(probs_path)
                if probs.shape[0] != record.length:
                    raise DataFormatError(
                        f"probability length {probs.shape[0]} != signal length {record.length}"
                    )
            records.append(DatasetRecord(record, labels, probs, split, labeled))
        except (DataFormatError, ArgumentError, KeyError, ValueError) as exc:
            if isinstance(exc, KeyError):
                raise DataFormatError(f"record {rid}: missing manifest field {exc}") from exc
            raise DataFormatError(f"record {rid}: {exc}") from exc
    return Dataset(records)


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass(frozen=True)
class SynthParams:
    """Periodic P-QRS-T beat generator settings.

    Wave and gap sizes are fractions of one beat period; their sum must not
    exceed 1. ``phase_frac`` shifts the beat grid left so records can start
    mid-beat.
    """

    heart_rate_bpm: float = 60.0
    duration_s: float = 10.0
    sample_rate: int = 250
    lead_frac: float = 0.06
    p_frac: float = 0.10
    pq_gap_frac: float = 0.05
    qrs_frac: float = 0.09
    st_gap_frac: float = 0.10
    t_frac: float = 0.18
    p_amp: float = 0.15
    qrs_amp: float = 1.0
    t_amp: float = 0.30
    noise_std: float = 0.0
    phase_frac: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.heart_rate_bpm <= 0 or self.duration_s <= 0 or self.sample_rate < 1:
            raise ArgumentError("heart rate, duration, and sample rate must be positive")
        if self.noise_std < 0:
            raise ArgumentError("noise_std must be >= 0")
        if not 0.0 <= self.phase_frac < 1.0:
            raise ArgumentError("phase_frac must lie in [0, 1)")
        total = (self.lead_frac + self.p_frac + self.pq_gap_frac + self.qrs_frac
                 + self.st_gap_frac + self.t_frac)
        if min(self.lead_frac, self.p_frac, self.pq_gap_frac, self.qrs_frac,
               self.st_gap_frac, self.t_frac) < 0:
            raise ArgumentError("wave fractions must be >= 0")
        if total > 1.0:
            raise ArgumentError(f"wave fractions sum to {total:.3f} > 1 beat period")


def _raised_cosine(n: int, amp: float) -> np.ndarray:
    u = (np.arange(n) + 0.5) / n
    return amp * 0.5 * (1.0 - np.cos(2.0 * np.pi * u))


def _biphasic(n: int, amp: float) -> np.ndarray:
    u = (np.arange(n) + 0.5) / n
    return amp * np.sin(2.0 * np.pi * u)


def _add_wave(signal: np.ndarray, labels: np.ndarray, start: int,
              template: np.ndarray, class_id: int) -> None:
    t = signal.size
    s = max(start, 0)
    e = min(start + template.size, t)
    if s >= e:
        return
    signal[s:e] += template[s - start:e - start]
    labels[s:e] = class_id


def synth_ecg(params: SynthParams, rng: Stream | None = None, *,
              record_id: str = "synth", lead_id: str = "II",
              ) -> tuple[EcgRecord, np.ndarray]:
    """Generate one synthetic record and its exact wave labels.

    Each beat is BG, P (raised cosine), BG, QRS (sharp biphasic), BG, T (wide
    raised cosine), BG; labels mark exactly the template supports. White
    noise of ``noise_std`` is added from the stream (one normal per sample).
    """
    if rng is None:
        rng = Stream(params.seed)
    rate = params.sample_rate
    t_total = int(round(params.duration_s * rate))
    period = int(round(rate * 60.0 / params.heart_rate_bpm))
    if period < 8:
        raise ArgumentError(f"beat period of {period} samples is too short to place waves")

    lead_len = int(round(params.lead_frac * period))
    p_len = int(round(params.p_frac * period))
    pq_len = int(round(params.pq_gap_frac * period))
    qrs_len = int(round(params.qrs_frac * period))
    st_len = int(round(params.st_gap_frac * period))
    t_len = int(round(params.t_frac * period))
    if min(p_len, qrs_len, t_len) < 1:
        raise ArgumentError("a wave rounds to zero samples at this rate and heart rate")
    if lead_len + p_len + pq_len + qrs_len + st_len + t_len > period:
        raise ArgumentError("rounded wave layout exceeds the beat period")

    signal = np.zeros(t_total, dtype=np.float64)
    labels = np.zeros(t_total, dtype=np.int64)
    p_tpl = _raised_cosine(p_len, params.p_amp)
    qrs_tpl = _biphasic(qrs_len, params.qrs_amp)
    t_tpl = _raised_cosine(t_len, params.t_amp)

    beat_start = -int(round(params.phase_frac * period))
    while beat_start < t_total:
        pos = beat_start + lead_len
        _add_wave(signal, labels, pos, p_tpl, P_WAVE)
        pos += p_len + pq_len
        _add_wave(signal, labels, pos, qrs_tpl, QRS)
        pos += qrs_len + st_len
        _add_wave(signal, labels, pos, t_tpl, T_WAVE)
        beat_start += period

    if params.noise_std > 0:
        signal = signal + params.noise_std * rng.normal_block(t_total)

    record = EcgRecord(record_id, lead_id, rate, signal)
    assert not find_violations(labels), "generator produced an invalid cardiac sequence"
    return record, labels


def corrupt_labels(labels, boundary_jitter_samples: int, flip_rate: float,
                   sharpness: float, rng: Stream,
                   num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Simulated teacher output for a label sequence.

    Each internal run boundary shifts by a uniform integer in
    [-jitter, +jitter] (clamped to stay ordered), each timestep flips to a
    uniformly random other class with probability ``flip_rate``, and the map
    puts ``sharpness`` on the resulting class with the remainder spread
    evenly over the others. Draw order: one jitter per boundary left to
    right, one flip uniform per timestep (as a block), then one class draw
    per flipped timestep in ascending order.
    """
    arr = as_labels(labels, num_classes)
    if boundary_jitter_samples < 0:
        raise ArgumentError("boundary jitter must be >= 0")
    if not 0.0 <= flip_rate <= 1.0:
        raise ArgumentError("flip_rate must lie in [0, 1]")
    if not 0.0 < sharpness <= 1.0:
        raise ArgumentError("sharpness must lie in (0, 1]")

    runs = to_runs(arr)
    t_total = arr.size
    corrupted = arr
    if boundary_jitter_samples > 0 and len(runs) > 1:
        boundaries = [runs[i][0] for i in range(1, len(runs))]
        shifted = []
        prev = 0
        for b in boundaries:
            nb = b + rng.randint(-boundary_jitter_samples, boundary_jitter_samples)
            nb = min(max(nb, prev), t_total)
            shifted.append(nb)
            prev = nb
        corrupted = np.empty(t_total, dtype=np.int64)
        edges = [0, *shifted, t_total]
        for (s, e), (_, _, class_id) in zip(zip(edges[:-1], edges[1:]), runs):
            corrupted[s:e] = class_id
    else:
        corrupted = arr.copy()

    if flip_rate > 0:
        flips = rng.uniform_block(t_total) < flip_rate
        for t in np.flatnonzero(flips).tolist():
            corrupted[t] = (corrupted[t] + 1 + rng.below(num_classes - 1)) % num_classes

    off = (1.0 - sharpness) / (num_classes - 1)
    probs = np.full((t_total, num_classes), off, dtype=np.float64)
    probs[np.arange(t_total), corrupted] = sharpness
    return probs
