import os

import numpy as np
import pytest

from facetrack.cli import CliError, load_config, main
from facetrack.tracker import TrackerConfig


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("seq")
    rc = main(["synth", "--scenario", "translation", "--out", str(out), "--frames", "12", "--seed", "5"])
    assert rc == 0
    return out


class TestSynthCommand:
    def test_output_loadable(self, synth_dir):
        from facetrack.bench import load_sequence

        seq = load_sequence(str(synth_dir))
        assert len(seq) == 12

    def test_bad_flag_value_usage_error(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["synth", "--scenario", "warp", "--out", str(tmp_path)])

    def test_bad_occlusion_window(self, tmp_path):
        rc = main(["synth", "--scenario", "occlusion", "--out", str(tmp_path), "--occ-window", "9,2"])
        assert rc != 0

    def test_repeat_seed_identical_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--scenario", "clutter", "--out", str(out), "--frames", "4", "--seed", "9"]) == 0
        for name in sorted(os.listdir(a / "img")):
            assert (a / "img" / name).read_bytes() == (b / "img" / name).read_bytes()
        assert (a / "groundtruth_rect.txt").read_bytes() == (b / "groundtruth_rect.txt").read_bytes()
        assert (a / "detections.csv").read_bytes() == (b / "detections.csv").read_bytes()


class TestRunCommand:
    def test_run_writes_reports(self, synth_dir, tmp_path):
        out = tmp_path / "run"
        rc = main(["run", str(synth_dir), "--output", str(out)])
        assert rc == 0
        for name in ("results.csv", "curves.csv", "summary.txt", "precision.png", "success.png"):
            assert (out / name).exists(), name
        lines = (out / "results.csv").read_text().strip().split("\n")
        assert len(lines) == 13  # header + 12 frames

    def test_missing_sequence_dir(self, tmp_path):
        rc = main(["run", str(tmp_path / "ghost"), "--output", str(tmp_path / "o")])
        assert rc != 0

    def test_init_detections_without_detection_fails(self, synth_dir, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("frame,x,y,w,h,score\n")
        rc = main(
            [
                "run",
                str(synth_dir),
                "--init",
                "detections",
                "--detections",
                str(empty),
                "--output",
                str(tmp_path / "o"),
            ]
        )
        assert rc != 0

    def test_init_from_detections(self, synth_dir, tmp_path):
        rc = main(
            [
                "run",
                str(synth_dir),
                "--init",
                "detections",
                "--detections",
                str(synth_dir / "detections.csv"),
                "--output",
                str(tmp_path / "o"),
            ]
        )
        assert rc == 0

    def test_overlays_flag(self, synth_dir, tmp_path):
        out = tmp_path / "ov"
        rc = main(["run", str(synth_dir), "--output", str(out), "--overlays"])
        assert rc == 0
        assert len(os.listdir(out / "overlays")) == 12

    def test_multi_sequence_jobs(self, synth_dir, tmp_path):
        second = tmp_path / "seq2"
        main(["synth", "--scenario", "translation", "--out", str(second), "--frames", "12", "--seed", "6"])
        out = tmp_path / "multi"
        rc = main(["run", str(synth_dir), str(second), "--output", str(out), "--jobs", "2"])
        assert rc == 0
        names = {os.path.basename(os.path.normpath(str(synth_dir))), "seq2"}
        assert set(os.listdir(out)) == names
        for n in names:
            assert (out / n / "results.csv").exists()


class TestEvalCommand:
    def test_results_equal_gt(self, synth_dir, tmp_path, capsys):
        # craft a results file that reproduces the ground truth exactly
        from facetrack.bench import load_ground_truth

        gt = load_ground_truth(str(synth_dir / "groundtruth_rect.txt"))
        res = tmp_path / "results.csv"
        with open(res, "w") as fh:
            fh.write("frame,x,y,w,h,score,occluded\n")
            for i, b in enumerate(gt, start=1):
                fh.write(f"{i},{b.x!r},{b.y!r},{b.w!r},{b.h!r},0.5,0\n")
        rc = main(["eval", str(res), str(synth_dir / "groundtruth_rect.txt"), "--output", str(tmp_path)])
        assert rc == 0
        outp = capsys.readouterr().out
        assert "precision@20 1.000" in outp
        assert "success AUC 1.000" in outp
        lines = (tmp_path / "curves.csv").read_text().strip().split("\n")
        assert len([l for l in lines if l.startswith("precision,")]) == 51
        assert len([l for l in lines if l.startswith("success,")]) == 21

    def test_mismatched_lengths(self, synth_dir, tmp_path):
        res = tmp_path / "r.csv"
        res.write_text("frame,x,y,w,h,score,occluded\n1,0,0,5,5,0.5,0\n")
        rc = main(["eval", str(res), str(synth_dir / "groundtruth_rect.txt")])
        assert rc != 0


class TestConfigFile:
    def test_keys_mirror_tracker_config(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("eta = 0.01\nmax_nodes = 100\ndisable_detector = true\n# comment\n")
        cfg = load_config(str(p))
        assert cfg.eta == 0.01
        assert cfg.max_nodes == 100
        assert cfg.disable_detector is True

    def test_unknown_key_hard_error(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("etaa = 0.01\n")
        with pytest.raises(CliError, match="unknown config key"):
            load_config(str(p))

    def test_every_field_accepted(self, tmp_path):
        import dataclasses

        lines = []
        for f in dataclasses.fields(TrackerConfig):
            v = getattr(TrackerConfig(), f.name)
            lines.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        p = tmp_path / "cfg.txt"
        p.write_text("\n".join(lines))
        assert load_config(str(p)) == TrackerConfig()

    def test_invalid_value_rejected(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("tau = 1.5\n")
        with pytest.raises(CliError):
            load_config(str(p))
