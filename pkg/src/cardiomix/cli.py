"""Batch command-line front end.

Subcommands: ``preprocess``, ``fuse``, ``consistency``, ``evaluate``,
``synth``, ``corrupt``, ``oracle-check``. Every command is deterministic
given its flags and seed; CSV outputs use a fixed column order and ``\\n``
line endings so runs can be compared byte for byte.

Exit codes: 0 success, 2 argument error, 3 data/format error, 4 oracle
mismatch.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .consistency import consistency_ratio, find_violations
from .core import ArgumentError, DataFormatError, EcgRecord
from .fusion import (
    FusionOutcome,
    FusionParams,
    cardiomix_step,
    fuse_l2u,
    fuse_u2l,
    vanilla_cutmix,
)
from .io_formats import (
    Dataset,
    DatasetRecord,
    SynthParams,
    corrupt_labels,
    load_dataset,
    save_dataset,
    synth_ecg,
)
from .metrics import (
    DEFAULT_MATCH_TOL_MS,
    confusion_matrix,
    extract_fiducials,
    interval_abs_errors,
    interval_mae_from_errors,
    match_beats,
    per_class_iou,
)
from .oracles import run_oracle_suite
from .preprocess import (
    DEFAULT_HI_HZ,
    DEFAULT_LO_HZ,
    DEFAULT_RATE,
    DEFAULT_SECONDS,
    preprocess_pipeline,
)
from .rng import Stream

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_DATA = 3
EXIT_ORACLE = 4

OUTCOME_COLUMNS = ("step", "direction", "record_id", "s_q", "j_star", "s_k_star",
                   "score", "confidence", "gated")
CONSISTENCY_COLUMNS = ("record_id", "t_start", "t_end", "reason")
EVALUATE_COLUMNS = ("iou_bg", "iou_p", "iou_qrs", "iou_t", "miou",
                    "mae_pr_ms", "mae_qrs_ms", "mae_qt_ms", "mae_avg_ms",
                    "matched_beats", "pr_pairs", "qrs_pairs", "qt_pairs")


def _fmt_float(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _fmt_gated(gated: bool | None) -> str:
    if gated is None:
        return ""
    return "true" if gated else "false"


def outcome_row(step: int, direction: str, record_id: str, o: FusionOutcome,
                ) -> tuple[str, ...]:
    """One outcomes-CSV row; shared by the CLI and the bindings package."""
    return (str(step), direction, record_id, str(o.query_start), str(o.source_index),
            str(o.key_start), _fmt_float(o.score), _fmt_float(o.confidence),
            _fmt_gated(o.gated))


def write_csv(stream, columns, rows) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)


def outcomes_csv_text(rows) -> str:
    import io

    buf = io.StringIO()
    write_csv(buf, OUTCOME_COLUMNS, rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# fuse


def _labeled_pair(rec: DatasetRecord):
    return rec.record.samples, rec.labels


def _unlabeled_pair(rec: DatasetRecord):
    return rec.record.samples, rec.probs


def _cycle(pool: list, step: int, batch: int) -> list:
    return [pool[(step * batch + i) % len(pool)] for i in range(batch)]


def _fused_record(target: DatasetRecord, outcome: FusionOutcome, step: int,
                  batch_pos: int, direction: str) -> DatasetRecord:
    rid = f"{target.record.record_id}_s{step:03d}_b{batch_pos:02d}_{direction}"
    rec = EcgRecord(rid, target.record.lead_id, target.record.sample_rate,
                    outcome.fused_signal)
    return DatasetRecord(rec, labels=outcome.fused_labels, split="train", labeled=True)


def run_fuse(labeled: list[DatasetRecord], unlabeled: list[DatasetRecord],
             params: FusionParams, mode: str, steps: int, batch: int,
             threads: int) -> tuple[list[DatasetRecord], list[tuple[str, ...]]]:
    """Deterministic multi-step fusion over manifest pools.

    Step k draws its batches by cyclic slicing (position ``k*batch + i`` mod
    pool size) and uses substream k of the master seed stream.
    """
    if steps < 1 or batch < 1:
        raise ArgumentError("steps and batch must be >= 1")
    if mode in ("cardiomix", "l2u", "u2l") and not labeled:
        raise DataFormatError("manifest has no labeled records with labels")
    if not unlabeled:
        raise DataFormatError("manifest has no unlabeled records")
    for rec in unlabeled:
        if rec.probs is None:
            raise DataFormatError(
                f"record {rec.record.record_id}: unlabeled record has no probs_path"
            )

    master = Stream(params.seed)
    fused: list[DatasetRecord] = []
    rows: list[tuple[str, ...]] = []
    for step in range(steps):
        root = master.child(step)
        ub = _cycle(unlabeled, step, batch)
        unlabeled_batch = [_unlabeled_pair(r) for r in ub]
        if mode == "vanilla":
            outcomes = vanilla_cutmix(unlabeled_batch, params, root, threads=threads)
            for i, o in enumerate(outcomes):
                rows.append(outcome_row(step, "vanilla", ub[i].record.record_id, o))
                fused.append(_fused_record(ub[i], o, step, i, "vanilla"))
            continue
        lb = _cycle(labeled, step, batch)
        labeled_batch = [_labeled_pair(r) for r in lb]
        if mode == "cardiomix":
            result = cardiomix_step(labeled_batch, unlabeled_batch, params, root,
                                    threads=threads)
            l2u, u2l = result.l2u, result.u2l
        elif mode == "l2u":
            l2u = fuse_l2u(unlabeled_batch, labeled_batch, params, root, threads=threads)
            u2l = []
        else:
            l2u = []
            u2l = fuse_u2l(labeled_batch, unlabeled_batch, params, root, threads=threads)
        for i, o in enumerate(l2u):
            rows.append(outcome_row(step, "l2u", ub[i].record.record_id, o))
            fused.append(_fused_record(ub[i], o, step, i, "l2u"))
        for i, o in enumerate(u2l):
            rows.append(outcome_row(step, "u2l", lb[i].record.record_id, o))
            fused.append(_fused_record(lb[i], o, step, i, "u2l"))
    return fused, rows


def cmd_fuse(args) -> int:
    params = FusionParams(w_min=args.wmin, w_max=args.wmax, tau=args.tau,
                          criterion=args.criterion,
                          direction="bidirectional" if args.mode == "cardiomix" else args.mode,
                          seed=args.seed)
    dataset = load_dataset(args.manifest)
    labeled = [r for r in dataset.labeled_records() if r.labels is not None]
    unlabeled = dataset.unlabeled_records()
    fused, rows = run_fuse(labeled, unlabeled, params, args.mode, args.steps,
                           args.batch, args.threads)
    out_dir = Path(args.out)
    save_dataset(Dataset(fused), out_dir)
    with open(out_dir / "outcomes.csv", "w", encoding="utf-8", newline="") as fh:
        write_csv(fh, OUTCOME_COLUMNS, rows)
    print(f"fuse: wrote {len(fused)} fused records and {len(rows)} outcomes to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# preprocess


def cmd_preprocess(args) -> int:
    dataset = load_dataset(args.manifest)
    out_records = []
    for rec in dataset.records:
        new_rec, new_labels = preprocess_pipeline(
            rec.record, rec.labels, target_rate=args.rate, lo=args.lo, hi=args.hi,
            seconds=args.seconds)
        probs = rec.probs
        if probs is not None and probs.shape[0] != new_rec.length:
            print(f"preprocess: dropping probs of {rec.record.record_id} "
                  f"(length {probs.shape[0]} != {new_rec.length})", file=sys.stderr)
            probs = None
        out_records.append(DatasetRecord(new_rec, new_labels, probs, rec.split, rec.labeled))
    save_dataset(Dataset(out_records), Path(args.out))
    print(f"preprocess: wrote {len(out_records)} records to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# consistency


def cmd_consistency(args) -> int:
    dataset = load_dataset(args.manifest)
    exempt = not args.no_start_exemption
    rows = []
    labels_batch = []
    for rec in dataset.records:
        if rec.labels is None:
            raise DataFormatError(f"record {rec.record.record_id}: no labels to check")
        labels_batch.append(rec.labels)
        for v in find_violations(rec.labels, exempt_first_wave=exempt):
            rows.append((rec.record.record_id, str(v.t_start), str(v.t_end), v.reason))
    ratio = consistency_ratio(labels_batch, exempt_first_wave=exempt)
    rows.append(("__ratio__", repr(ratio), "", ""))
    write_csv(sys.stdout, CONSISTENCY_COLUMNS, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args) -> int:
    preds = load_dataset(args.pred_manifest)
    gts = load_dataset(args.gt_manifest)
    pred_by_key = {(r.record.record_id, r.record.lead_id): r for r in preds.records}
    pred_labels = []
    gt_labels = []
    all_errors = {"pr": [], "qrs": [], "qt": []}
    matched = 0
    for gt_rec in gts.records:
        key = (gt_rec.record.record_id, gt_rec.record.lead_id)
        if key not in pred_by_key:
            raise DataFormatError(f"record {key[0]} ({key[1]}): missing from predictions")
        pred_rec = pred_by_key[key]
        if gt_rec.labels is None or pred_rec.labels is None:
            raise DataFormatError(f"record {key[0]}: both manifests need labels")
        pred_labels.append(pred_rec.labels)
        gt_labels.append(gt_rec.labels)
        matches = match_beats(extract_fiducials(pred_rec.labels),
                              extract_fiducials(gt_rec.labels),
                              gt_rec.record.sample_rate, args.match_tol_ms)
        matched += len(matches)
        for name, errs in interval_abs_errors(matches, gt_rec.record.sample_rate).items():
            all_errors[name].extend(errs)
    cm = confusion_matrix(pred_labels, gt_labels)
    ious = per_class_iou(cm)
    summary = interval_mae_from_errors(all_errors, matched)
    row = tuple(repr(float(v)) for v in ious) + (repr(float(ious.mean())),) + (
        _fmt_float(summary.pr_mae_ms), _fmt_float(summary.qrs_mae_ms),
        _fmt_float(summary.qt_mae_ms), _fmt_float(summary.avg_mae_ms),
        str(summary.matched_beats), str(summary.pr_pairs), str(summary.qrs_pairs),
        str(summary.qt_pairs))
    write_csv(sys.stdout, EVALUATE_COLUMNS, [row])
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth / corrupt


def cmd_synth(args) -> int:
    if args.n < 1:
        raise ArgumentError("--n must be >= 1")
    master = Stream(args.seed)
    records = []
    for i in range(args.n):
        stream = master.child(i)
        bpm = args.bpm
        if args.bpm_max is not None:
            if args.bpm_max < args.bpm:
                raise ArgumentError("--bpm-max must be >= --bpm")
            bpm = stream.randint(int(args.bpm), int(args.bpm_max))
        phase = stream.uniform() if args.phase_jitter else 0.0
        params = SynthParams(heart_rate_bpm=bpm, duration_s=args.seconds,
                             sample_rate=args.rate, noise_std=args.noise_std,
                             phase_frac=phase)
        record, labels = synth_ecg(params, stream, record_id=f"synth{i:04d}")
        records.append(DatasetRecord(record, labels, split="train", labeled=True))
    save_dataset(Dataset(records), Path(args.out))
    print(f"synth: wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_corrupt(args) -> int:
    dataset = load_dataset(args.manifest)
    master = Stream(args.seed)
    n = len(dataset.records)
    if n == 0:
        raise DataFormatError("manifest has no records")
    if not 0.0 <= args.labeled_frac <= 1.0:
        raise ArgumentError("--labeled-frac must lie in [0, 1]")
    n_labeled = int(np.ceil(args.labeled_frac * n))
    out_records = []
    for i, rec in enumerate(dataset.records):
        if rec.labels is None:
            raise DataFormatError(f"record {rec.record.record_id}: corrupt needs labels")
        probs = corrupt_labels(rec.labels, args.jitter, args.flip, args.sharpness,
                               master.child(i))
        out_records.append(DatasetRecord(rec.record, rec.labels, probs, rec.split,
                                         labeled=i < n_labeled))
    save_dataset(Dataset(out_records), Path(args.out))
    print(f"corrupt: wrote {len(out_records)} records to {args.out} "
          f"({n_labeled} labeled, {n - n_labeled} unlabeled)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-check


def cmd_oracle_check(args) -> int:
    mismatches, elapsed = run_oracle_suite(args.seed, args.trials)
    if mismatches:
        for msg in mismatches[:10]:
            print(msg, file=sys.stderr)
        print(f"oracle-check: {len(mismatches)} mismatches in {args.trials} trials",
              file=sys.stderr)
        return EXIT_ORACLE
    print(f"oracle-check: {args.trials} trials ok in {elapsed:.2f}s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardiomix",
        description="Cardiac-pattern-guided bidirectional CutMix over ECG datasets.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str):
        return sub.add_parser(name, help=help_text,
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = add("preprocess", "duration-fix, resample, band-pass, and z-score a dataset")
    p.add_argument("--manifest", required=True, help="input manifest path")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--rate", type=int, default=DEFAULT_RATE, help="target sample rate (Hz)")
    p.add_argument("--lo", type=float, default=DEFAULT_LO_HZ, help="band-pass low edge (Hz)")
    p.add_argument("--hi", type=float, default=DEFAULT_HI_HZ, help="band-pass high edge (Hz)")
    p.add_argument("--seconds", type=float, default=DEFAULT_SECONDS,
                   help="fixed duration (s)")
    p.set_defaults(fn=cmd_preprocess)

    p = add("fuse", "run segment fusion over a dataset and write fused records")
    p.add_argument("--manifest", required=True, help="input manifest path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=("cardiomix", "l2u", "u2l", "vanilla"),
                   default="cardiomix", help="fusion direction(s)")
    p.add_argument("--criterion", choices=("pattern", "signal", "random"),
                   default="pattern", help="key-segment selection criterion")
    p.add_argument("--tau", type=float, default=0.8, help="confidence gate threshold")
    p.add_argument("--wmin", type=int, default=250, help="minimum window width (samples)")
    p.add_argument("--wmax", type=int, default=1250, help="maximum window width (samples)")
    p.add_argument("--batch", type=int, default=16, help="mini-batch size per step")
    p.add_argument("--steps", type=int, default=1, help="number of fusion steps")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (outputs never depend on this)")
    p.set_defaults(fn=cmd_fuse)

    p = add("consistency", "report cardiac-order violations and the batch ratio")
    p.add_argument("--manifest", required=True, help="input manifest path")
    p.add_argument("--no-start-exemption", action="store_true",
                   help="also flag a T run that is the first wave of a record")
    p.set_defaults(fn=cmd_consistency)

    p = add("evaluate", "mIoU and PR/QRS/QT interval MAEs of predictions vs ground truth")
    p.add_argument("--pred-manifest", required=True, help="predictions manifest path")
    p.add_argument("--gt-manifest", required=True, help="ground-truth manifest path")
    p.add_argument("--match-tol-ms", type=float, default=DEFAULT_MATCH_TOL_MS,
                   help="beat matching tolerance (ms)")
    p.set_defaults(fn=cmd_evaluate)

    p = add("synth", "generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n", type=int, default=16, help="number of records")
    p.add_argument("--bpm", type=float, default=60.0, help="heart rate (bpm)")
    p.add_argument("--bpm-max", type=float, default=None,
                   help="draw heart rate per record from [--bpm, --bpm-max]")
    p.add_argument("--seconds", type=float, default=10.0, help="record duration (s)")
    p.add_argument("--rate", type=int, default=250, help="sample rate (Hz)")
    p.add_argument("--noise-std", type=float, default=0.05, help="white noise std")
    p.add_argument("--phase-jitter", action=argparse.BooleanOptionalAction, default=True,
                   help="randomize each record's starting phase")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed")
    p.set_defaults(fn=cmd_synth)

    p = add("corrupt", "derive simulated teacher maps from labels")
    p.add_argument("--manifest", required=True, help="input manifest path")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--jitter", type=int, default=0, help="boundary jitter (samples)")
    p.add_argument("--flip", type=float, default=0.0, help="per-timestep flip rate")
    p.add_argument("--sharpness", type=float, default=1.0,
                   help="probability mass on the (corrupted) class")
    p.add_argument("--labeled-frac", type=float, default=0.5,
                   help="fraction of records kept labeled; the rest become the "
                        "unlabeled pool")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed")
    p.set_defaults(fn=cmd_corrupt)

    p = add("oracle-check", "cross-check the engine against brute-force oracles")
    p.add_argument("--seed", type=int, default=7, help="PRNG seed")
    p.add_argument("--trials", type=int, default=1000, help="number of random instances")
    p.set_defaults(fn=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ArgumentError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))
