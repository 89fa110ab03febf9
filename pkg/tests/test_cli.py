from __future__ import annotations

import json
from pathlib import Path

import pytest

import boothcount
from boothcount import Direction, CrossingEvent, GroundTruthEvent, write_events_csv, write_truth_csv
from boothcount.cli import EXIT_OK, EXIT_CONFIG, EXIT_INPUT, build_parser, main


pytestmark = [pytest.mark.pipeline, pytest.mark.base()]


def test_parser():
    parser = build_parser()
    args = parser.parse_args(["count", "-i", "frames", "--line", "0,1,2,3", "--set", "mog2.history=5"])
    assert args.command == "count"
    assert args.input == Path("frames")
    assert args.overrides == ["mog2.history=5"]
    args = parser.parse_args(["synth"])
    assert (args.preset, args.seed, args.output_dir) == ("single_cross", 0, Path("scene"))
    args = parser.parse_args(["suite", "--seeds", "3", "--counts", "2", "4"])
    assert (args.seeds, args.counts) == (3, [2, 4])
    # a subcommand is required
    with pytest.raises(SystemExit):
        parser.parse_args([])


def test_version(capsys: pytest.CaptureFixture[str]):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
    assert boothcount.__version__ in capsys.readouterr().out


def test_synth(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "scene"
    code = main([
        "synth", "single_cross", "-o", str(out), "--seed", "7", "--width", "64", "--height", "48"
    ])
    assert code == EXIT_OK
    assert (out / "truth.csv").is_file()
    assert (out / "frame_000000.pgm").is_file()
    assert "truth=" in capsys.readouterr().out
    # same invocation, same bytes
    again = tmp_path / "again"
    main(["synth", "single_cross", "-o", str(again), "--seed", "7", "--width", "64", "--height", "48"])
    assert (out / "frame_000160.pgm").read_bytes() == (again / "frame_000160.pgm").read_bytes()
    assert (out / "truth.csv").read_bytes() == (again / "truth.csv").read_bytes()


def test_unknown_preset(tmp_path: Path, caplog: pytest.LogCaptureFixture):
    assert main(["synth", "moonwalk", "-o", str(tmp_path)]) == EXIT_CONFIG
    assert "single_cross" in caplog.text
    assert main(["count", "--preset", "moonwalk", "-o", str(tmp_path)]) == EXIT_CONFIG


def test_config_errors(tmp_path: Path):
    # no counting line for file input
    assert main(["count", "-i", str(tmp_path)]) == EXIT_CONFIG
    # can't tell what kind of input this is
    assert main(["count", "-i", str(tmp_path / "clip.avi")]) == EXIT_CONFIG
    # invalid parameter
    assert main(["count", "--set", "mog2.history=0", "-o", str(tmp_path)]) == EXIT_CONFIG
    # shadow detection on luma input
    code = main(["count", "--set", "mog2.detect_shadows=true", "-o", str(tmp_path)])
    assert code == EXIT_CONFIG
    # benchmarks need at least one run
    assert main(["bench", "--preset", "lighting_drift", "--repeat", "0"]) == EXIT_CONFIG


def test_input_errors(tmp_path: Path):
    clip = tmp_path / "clip.y4m"
    clip.write_bytes(b"RIFF W16 H16 C444\nFRAME\n")
    code = main(["count", "-i", str(clip), "--line", "0,8,16,8", "-o", str(tmp_path / "out")])
    assert code == EXIT_INPUT
    events = tmp_path / "events.csv"
    events.write_text("not,an,events,file\n")
    truth = tmp_path / "truth.csv"
    write_truth_csv([], truth)
    assert main(["eval", str(events), str(truth)]) == EXIT_INPUT
    assert main(["eval", str(tmp_path / "missing.csv"), str(truth)]) == EXIT_INPUT
    # frames below the minimum size
    frames = tmp_path / "small"
    frames.mkdir()
    (frames / "000.pgm").write_bytes(b"P5\n8 8\n255\n" + bytes(64))
    code = main(["count", "-i", str(frames), "--line", "0,4,8,4", "-o", str(tmp_path / "out")])
    assert code == EXIT_INPUT


def test_eval(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    events, truth = tmp_path / "events.csv", tmp_path / "truth.csv"
    write_events_csv([CrossingEvent(10, 1, Direction.Enter, (1.0, 2.0))], events)
    write_truth_csv([GroundTruthEvent(12, Direction.Enter)], truth)
    code = main(["eval", str(events), str(truth), "-o", str(tmp_path / "eval")])
    assert code == EXIT_OK
    assert "Overall counting average: 100.00%" in capsys.readouterr().out
    report = json.loads((tmp_path / "eval" / "report.json").read_text())
    assert report["enter"]["tp"] == 1


def test_bench(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    out = tmp_path / "bench"
    code = main([
        "bench", "--preset", "lighting_drift", "--width", "64", "--height", "48", "-o", str(out)
    ])
    assert code == EXIT_OK
    data = json.loads((out / "bench.json").read_text())
    assert data["frames"] == 300
    assert "fps mean" in capsys.readouterr().out
