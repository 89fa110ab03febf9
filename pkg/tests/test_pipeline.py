from __future__ import annotations

import json
from pathlib import Path
from typing import Tuple

import numpy as np
import pytest

from boothcount import (
    STAGES,
    Direction,
    Pipeline,
    RunSummary,
    SceneSpec,
    CountingLine,
    CrossingEvent,
    GroundTruthEvent,
    Frame,
    ConfigError,
    InvariantError,
    default_config,
    load_config,
    export_scene,
    run_count,
    run_eval,
    run_bench,
    run_suite,
    read_pgm,
    read_events_csv,
    write_events_csv,
    write_truth_csv,
)

from .conftest import constant_frame


pytestmark = [pytest.mark.pipeline, pytest.mark.base()]


def _quiet_scene(directory: Path, frames: int = 100) -> Path:
    # a still, slightly noisy scene, nobody walks through
    spec = SceneSpec(
        width=64,
        height=64,
        frame_count=frames,
        background_level=90,
        noise_sigma=1.0,
        line=((0.0, 32.0), (64.0, 32.0)),
        seed=5,
    )
    export_scene(spec, directory)
    return directory


def test_pipeline_process():
    config = default_config()
    line = CountingLine((0, 12), (32, 12))
    pipeline = Pipeline(config, 32, 24, 1, line)
    # size-relative defaults are resolved against the frame size
    assert pipeline.morph.min_blob_area == 4
    assert pipeline.tracker.params.max_match_distance == pytest.approx(4.0)
    for i in range(20):
        cleaned, tracks, events = pipeline.process(constant_frame(80, index=i))
        assert events == []
    # the first frame is all foreground, everything after is background
    assert cleaned.count == 0
    assert tracks == [] or all(not t.confirmed for t in tracks)
    assert pipeline.frames == 20
    assert set(pipeline.timer.totals) == set(STAGES)
    pipeline.check_totals()
    # totals that disagree with the events are a bug
    pipeline.counter.enter_total += 1
    with pytest.raises(InvariantError):
        pipeline.check_totals()


def _color_frame(rgb: Tuple[int, int, int], index: int) -> Frame:
    return Frame(np.full((24, 32, 3), rgb, dtype=np.uint8), index)


def test_pipeline_color_input():
    line = CountingLine((0, 12), (32, 12))
    # color frames are modeled as luma by default
    pipeline = Pipeline(default_config(), 32, 24, 3, line)
    assert pipeline.model.channels == 1
    pipeline.process(_color_frame((90, 120, 60), 0))
    background = pipeline.model.background_image()
    assert background.channels == 1
    assert int(background.pixels[0, 0]) == 104
    # color is kept on request, which allows the shadow test
    config = default_config(input_grayscale=False, mog2_detect_shadows=True)
    color = Pipeline(config, 32, 24, 3, line)
    assert color.model.channels == 3
    for i in range(1, 20):
        pipeline.process(_color_frame((90, 120, 60), i))
    for i in range(20):
        color.process(_color_frame((90, 120, 60), i))
    # the same scene, darkened to 70%
    shaded = _color_frame((63, 84, 42), 20)
    cleaned, _, _ = pipeline.process(shaded)
    assert cleaned.count == 32 * 24
    cleaned, _, _ = color.process(shaded)
    assert cleaned.count == 0


def test_run_summary():
    summary = RunSummary(10, 2.0, 3, 1, [])
    assert summary.occupancy == 2
    assert summary.line() == "frames=10 enter=3 exit=1 occupancy=2 fps=5.0"
    assert RunSummary(0, 0.0, 0, 0, []).fps == 0.0


def test_count_quiet_scene(tmp_path: Path):
    scene = _quiet_scene(tmp_path / "scene")
    out = tmp_path / "out"
    config = load_config(values={
        "input.source": "pgm_dir",
        "input.path": scene,
        "counter.line": "0,32,64,32",
        "eval.ground_truth": scene / "truth.csv",
        "output.directory": out,
        "output.mask_every": 10,
        "output.track_csv": True,
        "output.dump_background": True,
    })
    summary = run_count(config)
    assert summary.frames == 100
    assert (summary.enter_total, summary.exit_total) == (0, 0)
    assert summary.occupancy == 0
    assert summary.events == []
    # no truth events and no predictions score perfectly
    assert summary.report is not None
    assert summary.report.average_f1 == 1.0
    # artifacts
    assert read_events_csv(out / "events.csv") == []
    assert load_config(out / "config.ini").input_path == scene
    report = json.loads((out / "report.json").read_text())
    assert report["accuracy"]["overall"] == 100.0
    masks = sorted(p.name for p in (out / "masks").iterdir())
    assert masks == [f"{i:06d}.pgm" for i in range(0, 100, 10)]
    # the first frame is foreground everywhere
    assert (read_pgm(out / "masks" / "000000.pgm") == 255).all()
    assert (out / "tracks.csv").read_text().startswith("frame_index,id,x,y,state")
    background = read_pgm(out / "background.pgm")
    assert background.shape == (64, 64)
    assert np.abs(background.astype(int) - 90).max() <= 1


def test_count_needs_line(tmp_path: Path):
    scene = _quiet_scene(tmp_path, 2)
    with pytest.raises(ConfigError) as exc_info:
        load_config(values={"input.source": "pgm_dir", "input.path": scene})
    assert exc_info.value.field == "counter.line"


@pytest.mark.slow
def test_count_single_cross(out_dir: Path):
    config = default_config(input_seed=7, output_directory=out_dir)
    summary = run_count(config)
    assert (summary.enter_total, summary.exit_total) == (1, 0)
    assert summary.occupancy == 1
    assert [e.direction for e in summary.events] == [Direction.Enter]
    # the generated truth is scored automatically
    assert summary.report is not None
    assert summary.report.enter.tp == 1
    assert summary.report.average_f1 == 1.0
    assert (out_dir / "report.json").is_file()
    assert "average_f1=100.0%" in summary.line()


@pytest.mark.slow
def test_count_exported_scene(single_cross_dir: Tuple[Path, Path], out_dir: Path):
    directory, truth = single_cross_dir
    config = load_config(values={
        "input.source": "pgm_dir",
        "input.path": directory,
        "counter.line": "0,120,320,120",
        "eval.ground_truth": truth,
        "output.directory": out_dir,
    })
    summary = run_count(config)
    # reading the same scene from disk gives the same counts
    assert (summary.enter_total, summary.exit_total) == (1, 0)
    assert summary.report is not None
    assert summary.report.average_f1 == 1.0


@pytest.mark.slow
def test_count_determinism(tmp_path: Path):
    outputs = []
    for name in ("a", "b"):
        config = default_config(
            input_preset="n_people(2)",
            input_width=160,
            input_height=120,
            output_directory=tmp_path / name,
        )
        run_count(config)
        outputs.append(tuple(
            (tmp_path / name / file).read_bytes() for file in ("events.csv", "report.json")
        ))
    assert outputs[0] == outputs[1]


@pytest.mark.slow
def test_count_lighting_drift(out_dir: Path):
    # the background brightens by 40 over the scene, nobody walks through
    config = default_config(input_preset="lighting_drift", output_directory=out_dir)
    summary = run_count(config)
    assert summary.frames == 300
    assert summary.events == []
    assert (summary.enter_total, summary.exit_total) == (0, 0)
    assert summary.report is not None
    assert summary.report.average_f1 == 1.0


def test_run_eval(tmp_path: Path):
    truth = [GroundTruthEvent(100, Direction.Enter), GroundTruthEvent(200, Direction.Exit)]
    truth_path = tmp_path / "truth.csv"
    write_truth_csv(truth, truth_path)
    predicted_path = tmp_path / "events.csv"
    # identical files
    write_events_csv([
        CrossingEvent(100, 1, Direction.Enter, (0.0, 0.0)),
        CrossingEvent(200, 2, Direction.Exit, (0.0, 0.0)),
    ], predicted_path)
    report = run_eval(predicted_path, truth_path, output_dir=tmp_path / "eval")
    assert report.average_f1 == 1.0
    assert (tmp_path / "eval" / "report.json").is_file()
    # nothing predicted
    write_events_csv([], predicted_path)
    report = run_eval(predicted_path, truth_path)
    assert report.enter.recall == 0.0
    assert report.overall.fn == 2
    # out of order predictions get sorted first
    write_events_csv([
        CrossingEvent(210, 2, Direction.Exit, (0.0, 0.0)),
        CrossingEvent(95, 1, Direction.Enter, (0.0, 0.0)),
    ], predicted_path)
    report = run_eval(predicted_path, truth_path, 15)
    assert report.overall.tp == 2
    # a tighter window misses both
    report = run_eval(predicted_path, truth_path, 4)
    assert report.overall.tp == 0


def test_run_bench():
    config = default_config(input_preset="lighting_drift", input_width=64, input_height=48)
    with pytest.raises(ValueError):
        run_bench(config, 0)
    report = run_bench(config, 2)
    assert report.frames == 300
    assert report.size == (64, 48)
    assert len(report.fps) == 2
    assert set(report.stage_ms) == set(STAGES)
    # stages are timed within the wall time
    assert sum(report.stage_ms.values()) <= report.wall_ms
    data = report.to_dict()
    assert data["target_fps"] == 30.0
    assert data["meets_target"] == report.meets_target
    assert "fps mean" in report.table()


@pytest.mark.slow
def test_run_suite():
    config = default_config(input_width=160, input_height=120)
    rows = run_suite(range(2), (2,), config)
    assert len(rows) == 1
    row = rows[0]
    assert row.people == 2
    assert 0.0 <= row.average_f1 <= 1.0
    assert row.average_f1 == pytest.approx((row.enter_f1 + row.exit_f1) / 2)
    # the base configuration is left alone
    assert config.preset == "single_cross"
    with pytest.raises(ValueError):
        run_suite([], (2,), config)


@pytest.mark.slow
def test_suite_accuracy():
    # ten seeds of every scenario, at the default frame size
    rows = run_suite(range(10), (2, 4, 10))
    assert [row.people for row in rows] == [2, 4, 10]
    for row in rows:
        assert row.average_f1 >= 0.99, row
