import hashlib
import subprocess
import sys

import pytest

from cardiomix.cli import main
from cardiomix.io_formats import load_dataset


def tree_digest(root):
    """Stable digest of every file (relative path + bytes) under root."""
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def make_fused_inputs(tmp_path, n=8, seed=3):
    """synth -> corrupt: dataset with labeled and unlabeled (probed) halves."""
    raw = tmp_path / "raw"
    full = tmp_path / "full"
    assert main(["synth", "--out", str(raw), "--n", str(n), "--bpm", "55",
                 "--bpm-max", "105", "--noise-std", "0.1", "--seed", str(seed)]) == 0
    assert main(["corrupt", "--manifest", str(raw / "manifest.json"), "--out",
                 str(full), "--jitter", "2", "--flip", "0.02", "--sharpness", "0.9",
                 "--seed", str(seed + 1)]) == 0
    return full / "manifest.json"


class TestSynthCorrupt:
    def test_synth_writes_loadable_dataset(self, tmp_path):
        out = tmp_path / "ds"
        assert main(["synth", "--out", str(out), "--n", "3", "--seed", "1"]) == 0
        ds = load_dataset(out / "manifest.json")
        assert len(ds.records) == 3
        assert all(r.labels is not None for r in ds.records)
        assert all(r.record.length == 2500 for r in ds.records)

    def test_corrupt_splits_pools(self, tmp_path):
        manifest = make_fused_inputs(tmp_path, n=8)
        ds = load_dataset(manifest)
        assert len(ds.labeled_records()) == 4
        assert len(ds.unlabeled_records()) == 4
        assert all(r.probs is not None for r in ds.records)


class TestIdempotence:
    def test_synth_corrupt_preprocess_repeat_bitwise(self, tmp_path):
        trees = {}
        for tag in ("a", "b"):
            raw = tmp_path / f"raw_{tag}"
            assert main(["synth", "--out", str(raw), "--n", "4", "--bpm", "60",
                         "--bpm-max", "90", "--noise-std", "0.1", "--seed", "9"]) == 0
            cor = tmp_path / f"cor_{tag}"
            assert main(["corrupt", "--manifest", str(raw / "manifest.json"),
                         "--out", str(cor), "--jitter", "2", "--flip", "0.01",
                         "--sharpness", "0.85", "--seed", "3"]) == 0
            prep = tmp_path / f"prep_{tag}"
            assert main(["preprocess", "--manifest", str(raw / "manifest.json"),
                         "--out", str(prep)]) == 0
            trees[tag] = (tree_digest(raw), tree_digest(cor), tree_digest(prep))
        assert trees["a"] == trees["b"]

    def test_fuse_batch_larger_than_pool_wraps(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)  # 4 labeled + 4 unlabeled
        out = tmp_path / "wrap"
        assert main(["fuse", "--manifest", str(manifest), "--out", str(out),
                     "--mode", "cardiomix", "--batch", "6", "--steps", "2",
                     "--wmin", "200", "--wmax", "600", "--seed", "1"]) == 0
        fused = load_dataset(out / "manifest.json")
        ids = {r.record.record_id for r in fused.records}
        assert len(fused.records) == 24 and len(ids) == 24


class TestFuse:
    def test_byte_identical_repeat_runs(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)
        args = ["fuse", "--manifest", str(manifest), "--mode", "cardiomix",
                "--wmin", "250", "--wmax", "750", "--batch", "4", "--steps", "2",
                "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "f1")]) == 0
        assert main(args + ["--out", str(tmp_path / "f2")]) == 0
        assert tree_digest(tmp_path / "f1") == tree_digest(tmp_path / "f2")

    def test_thread_count_does_not_change_outputs(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)
        args = ["fuse", "--manifest", str(manifest), "--mode", "cardiomix",
                "--wmin", "250", "--wmax", "750", "--batch", "4", "--steps", "2",
                "--seed", "7"]
        assert main(args + ["--out", str(tmp_path / "t1"), "--threads", "1"]) == 0
        assert main(args + ["--out", str(tmp_path / "t8"), "--threads", "8"]) == 0
        assert tree_digest(tmp_path / "t1") == tree_digest(tmp_path / "t8")

    def test_tau_out_of_range_exits_2(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)
        code = main(["fuse", "--manifest", str(manifest), "--out",
                     str(tmp_path / "x"), "--tau", "1.01"])
        assert code == 2

    def test_outcomes_csv_schema(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)
        out = tmp_path / "f"
        assert main(["fuse", "--manifest", str(manifest), "--out", str(out),
                     "--mode", "cardiomix", "--wmin", "200", "--wmax", "400",
                     "--batch", "4", "--steps", "1", "--seed", "5"]) == 0
        lines = (out / "outcomes.csv").read_text().splitlines()
        assert lines[0] == "step,direction,record_id,s_q,j_star,s_k_star,score,confidence,gated"
        assert len(lines) == 1 + 8  # 4 l2u + 4 u2l
        l2u = [ln for ln in lines[1:] if ln.split(",")[1] == "l2u"]
        u2l = [ln for ln in lines[1:] if ln.split(",")[1] == "u2l"]
        assert len(l2u) == 4 and len(u2l) == 4
        for ln in l2u:
            fields = ln.split(",")
            assert fields[7] == "" and fields[8] == ""
        for ln in u2l:
            fields = ln.split(",")
            assert fields[8] in ("true", "false")
        fused = load_dataset(out / "manifest.json")
        assert len(fused.records) == 8

    def test_modes_produce_expected_directions(self, tmp_path):
        manifest = make_fused_inputs(tmp_path)
        for mode, directions in (("l2u", {"l2u"}), ("u2l", {"u2l"}),
                                 ("vanilla", {"vanilla"})):
            out = tmp_path / f"m_{mode}"
            assert main(["fuse", "--manifest", str(manifest), "--out", str(out),
                         "--mode", mode, "--wmin", "200", "--wmax", "400",
                         "--batch", "4", "--steps", "1", "--seed", "5"]) == 0
            lines = (out / "outcomes.csv").read_text().splitlines()[1:]
            assert {ln.split(",")[1] for ln in lines} == directions

    def test_missing_probs_exits_3(self, tmp_path):
        raw = tmp_path / "raw"
        main(["synth", "--out", str(raw), "--n", "4", "--seed", "1"])
        # mark half unlabeled without providing probs
        import json
        manifest_path = raw / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        for entry in manifest["records"][2:]:
            entry["labeled"] = False
        manifest_path.write_text(json.dumps(manifest))
        code = main(["fuse", "--manifest", str(manifest_path), "--out",
                     str(tmp_path / "x")])
        assert code == 3


class TestConsistency:
    def test_csv_output(self, tmp_path, capsys):
        manifest = make_fused_inputs(tmp_path)
        capsys.readouterr()  # drop setup chatter
        assert main(["consistency", "--manifest", str(manifest)]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0] == "record_id,t_start,t_end,reason"
        assert lines[-1].startswith("__ratio__,")
        ratio = float(lines[-1].split(",")[1])
        assert ratio == 1.0  # synthetic records are violation-free

    def test_no_start_exemption_flag(self, tmp_path, capsys):
        raw = tmp_path / "raw"
        # high phase jitter so some records begin mid-beat with a T wave
        assert main(["synth", "--out", str(raw), "--n", "12", "--seed", "2",
                     "--noise-std", "0"]) == 0
        capsys.readouterr()
        assert main(["consistency", "--manifest", str(raw / "manifest.json"),
                     "--no-start-exemption"]) == 0
        strict = capsys.readouterr().out.splitlines()
        strict_ratio = float(strict[-1].split(",")[1])
        assert main(["consistency", "--manifest", str(raw / "manifest.json")]) == 0
        lenient = capsys.readouterr().out.splitlines()
        lenient_ratio = float(lenient[-1].split(",")[1])
        assert lenient_ratio == 1.0
        assert strict_ratio <= lenient_ratio


class TestEvaluate:
    def test_self_evaluation_is_perfect(self, tmp_path, capsys):
        raw = tmp_path / "raw"
        assert main(["synth", "--out", str(raw), "--n", "4", "--seed", "4"]) == 0
        manifest = str(raw / "manifest.json")
        capsys.readouterr()
        assert main(["evaluate", "--pred-manifest", manifest,
                     "--gt-manifest", manifest]) == 0
        lines = capsys.readouterr().out.splitlines()
        header = lines[0].split(",")
        row = dict(zip(header, lines[1].split(",")))
        assert float(row["miou"]) == 1.0
        assert float(row["mae_avg_ms"]) == 0.0
        assert int(row["matched_beats"]) > 0

    def test_missing_record_exits_3(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        main(["synth", "--out", str(a), "--n", "2", "--seed", "4"])
        main(["synth", "--out", str(b), "--n", "3", "--seed", "4"])
        code = main(["evaluate", "--pred-manifest", str(a / "manifest.json"),
                     "--gt-manifest", str(b / "manifest.json")])
        assert code == 3


class TestPreprocess:
    def test_pipeline_via_cli(self, tmp_path):
        raw = tmp_path / "raw"
        assert main(["synth", "--out", str(raw), "--n", "2", "--rate", "500",
                     "--seconds", "12", "--seed", "6"]) == 0
        out = tmp_path / "prep"
        assert main(["preprocess", "--manifest", str(raw / "manifest.json"),
                     "--out", str(out)]) == 0
        ds = load_dataset(out / "manifest.json")
        for rec in ds.records:
            assert rec.record.sample_rate == 250
            assert rec.record.length == 2500
            assert rec.labels is not None and rec.labels.size == 2500
            assert abs(float(rec.record.samples.mean())) < 1e-6


class TestOracleCheck:
    def test_passes(self, capsys):
        assert main(["oracle-check", "--trials", "60", "--seed", "7"]) == 0
        assert "ok" in capsys.readouterr().out


class TestHelp:
    @pytest.mark.parametrize("command", ["preprocess", "fuse", "consistency",
                                         "evaluate", "synth", "corrupt",
                                         "oracle-check"])
    def test_help_shows_defaults(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        if command == "fuse":
            for token in ("0.8", "250", "1250"):
                assert token in text
        if command == "preprocess":
            for token in ("0.67", "40", "250", "10"):
                assert token in text

    def test_console_script_runs(self):
        proc = subprocess.run([sys.executable, "-m", "cardiomix", "oracle-check",
                               "--trials", "5", "--seed", "1"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ok" in proc.stdout
