import csv
import subprocess
import sys

import pytest

from meteorflow.cli import STATS_FIELDS, main, parse_mode
from meteorflow.errors import ConfigError


@pytest.fixture(scope="module")
def seq_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("seq")
    assert main(["gen", "--out", str(d), "--seed", "4", "--width", "240", "--height", "180",
                 "--frames", "30", "--stars", "15", "--meteors", "1"]) == 0
    return d


@pytest.mark.parametrize("text, expected", [("S", 0), ("s", 0), ("P1", 1), ("P12", 12)])
def test_parse_mode(text, expected):
    assert parse_mode(text) == expected


@pytest.mark.parametrize("text", ["P", "P0", "S1", "Q2", ""])
def test_parse_mode_rejects(text):
    with pytest.raises(ConfigError):
        parse_mode(text)


def test_gen_writes_frames_and_truth(seq_dir):
    assert len(list(seq_dir.glob("*.pgm"))) == 30
    assert (seq_dir / "truth.csv").exists()


def test_detect_then_check(seq_dir, tmp_path, capsys):
    tracks = tmp_path / "tracks.csv"
    stats = tmp_path / "stats.csv"
    assert main(["detect", "--in", str(seq_dir), "--out-tracks", str(tracks),
                 "--out-stats", str(stats)]) == 0
    with open(stats, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == STATS_FIELDS
    assert rows[0]["mode"] == "S" and rows[0]["i"] == "0" and rows[0]["frames"] == "30"
    assert main(["check", "--tracks", str(tracks), "--truth", str(seq_dir / "truth.csv"),
                 "--strict"]) == 0
    assert "recall=1.000 false_positives=0" in capsys.readouterr().out


def test_sequential_and_pipeline_outputs_identical(seq_dir, tmp_path):
    outs = []
    for mode in ("S", "P2"):
        path = tmp_path / f"{mode}.csv"
        assert main(["detect", "--in", str(seq_dir), "--mode", mode, "--version", "1",
                     "--buf-cap", "2", "--out-tracks", str(path),
                     "--out-stats", str(tmp_path / "s.csv")]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("flags, needle", [
    (["--mode", "P0"], "--mode"),
    (["--light-min", "90", "--light-max", "80"], "--light-max"),
    (["--surface-min", "0"], "--surface-min"),
    (["--knn-k", "0"], "--knn-k"),
    (["--knn-d", "-1"], "--knn-d"),
    (["--buf-cap", "0"], "--buf-cap"),
    (["--track-min", "0"], "--track-min"),
])
def test_bad_flags_exit_2(seq_dir, tmp_path, capsys, flags, needle):
    code = main(["detect", "--in", str(seq_dir), "--out-tracks", str(tmp_path / "t.csv"),
                 "--out-stats", str(tmp_path / "s.csv"), *flags])
    assert code == 2
    assert needle in capsys.readouterr().err


def test_missing_input_exits_1(tmp_path, capsys):
    assert main(["detect", "--in", str(tmp_path / "nope")]) == 1
    assert "I/O error" in capsys.readouterr().err


def test_corrupt_frame_exits_1(tmp_path, capsys):
    (tmp_path / "frame_000000.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    assert main(["detect", "--in", str(tmp_path), "--out-tracks", str(tmp_path / "t.csv"),
                 "--out-stats", str(tmp_path / "s.csv")]) == 1
    assert "truncated" in capsys.readouterr().err


def test_bench_sweep(seq_dir, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--in", str(seq_dir), "--bench-secs", "0.2", "--sweep", "--max-i", "2",
                 "--out-stats", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["mode"] for r in rows] == ["S", "P1", "P2"]
    assert all(int(r["frames"]) > 0 for r in rows)


def test_bench_rejects_bad_duration(seq_dir):
    assert main(["bench", "--in", str(seq_dir), "--bench-secs", "0"]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "meteorflow", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "detect" in res.stdout
