from __future__ import annotations

import logging
import configparser
from time import perf_counter
from pathlib import Path
from statistics import fmean
from typing import Any, Optional, Union, List, Dict, Tuple, Sequence, Iterable

from .enums import Direction, InputSource
from .video_io import Frame, FrameStream, open_pgm_sequence, open_y4m, write_pgm, write_ppm
from .mog2 import BackgroundModel
from .blob import BinaryMask, binarize, clean_mask, connected_components, extract_blobs
from .tracker import Track, Tracker, TrackRow, track_rows, write_track_csv
from .counter import CounterState, CrossingEvent, CountingLine, write_events_csv, read_events_csv
from .evaluation import (
    GroundTruthEvent,
    MetricsReport,
    match_events,
    render_report,
    read_truth_csv,
    write_report,
)
from .synth import preset, generate_scene, export_scene
from .config import PipelineConfig, default_config
from .utils import StageTimer
from .exceptions import InvariantError


__all__ = [
    "STAGES",
    "TARGET_FPS",
    "RunSummary",
    "BenchReport",
    "SuiteRow",
    "Pipeline",
    "run_count",
    "run_synth",
    "run_eval",
    "run_bench",
    "run_suite",
]
logger = logging.getLogger(__package__)
PathLike = Union[str, Path]
STAGES = ("subtraction", "morphology", "labeling", "tracking")
TARGET_FPS = 30.0
SUITE_COUNTS = (2, 4, 10)


class Pipeline:
    """
    The per-frame processing chain: background subtraction, mask refinement, blob
    extraction, tracking and line counting.

    Parameters
    ----------
    config : PipelineConfig
        The run configuration.
    width : int
    height : int
    channels : int
        The input frame dimensions. Size-relative defaults are resolved against these.
        Color input is modeled as luma unless `PipelineConfig.grayscale` is off.
    line : CountingLine
        The line to count against.
    timer : Optional[StageTimer]
        A timer to account the stages with. A fresh one is made if not provided.

    Attributes
    ----------
    events : List[CrossingEvent]
        Every event counted so far, in frame order.
    """
    def __init__(
        self,
        config: PipelineConfig,
        width: int,
        height: int,
        channels: int,
        line: CountingLine,
        timer: Optional[StageTimer] = None,
    ):
        self.grayscale: bool = config.grayscale
        if self.grayscale:
            channels = 1
        self.model = BackgroundModel(width, height, channels, config.mog2)
        self.morph = config.morph.resolve(width, height)
        self.tracker = Tracker(config.tracker.resolve(width, height))
        self.counter = CounterState(line)
        self.timer = timer if timer is not None else StageTimer(STAGES)
        self.events: List[CrossingEvent] = []
        self.frames: int = 0

    def process(self, frame: Frame) -> Tuple[BinaryMask, List[Track], List[CrossingEvent]]:
        """
        Pushes a single frame through every stage.

        Returns
        -------
        Tuple[BinaryMask, List[Track], List[CrossingEvent]]
            The cleaned mask, the active tracks and the events counted in this frame.
        """
        timer = self.timer
        with timer.stage("subtraction"):
            if self.grayscale:
                frame = frame.luma()
            mask = self.model.apply(frame)
        with timer.stage("morphology"):
            cleaned = clean_mask(binarize(mask, self.morph.shadow_policy), self.morph)
        with timer.stage("labeling"):
            labels, _ = connected_components(cleaned)
            blobs = extract_blobs(labels, self.morph.min_blob_area)
        with timer.stage("tracking"):
            tracks = self.tracker.update(blobs, frame.index)
            events = self.counter.update(tracks, frame.index)
        self.events.extend(events)
        self.frames += 1
        return cleaned, tracks, events

    def check_totals(self):
        """
        Raises
        ------
        InvariantError
            The counter totals disagree with the emitted events.
        """
        enters = sum(1 for e in self.events if e.direction == Direction.Enter)
        exits = len(self.events) - enters
        if (enters, exits) != (self.counter.enter_total, self.counter.exit_total):
            raise InvariantError(
                f"counter totals ({self.counter.enter_total}, {self.counter.exit_total}) "
                f"don't match the emitted events ({enters}, {exits})"
            )


class RunSummary:
    """
    The outcome of a counting run.

    Attributes
    ----------
    frames : int
        The amount of frames processed.
    seconds : float
        The wall-clock duration of the run.
    enter_total : int
    exit_total : int
        The counted crossings per direction.
    events : List[CrossingEvent]
        The counted crossings.
    report : Optional[MetricsReport]
        The evaluation report, if ground truth was available.
    """
    def __init__(
        self,
        frames: int,
        seconds: float,
        enter_total: int,
        exit_total: int,
        events: List[CrossingEvent],
        report: Optional[MetricsReport] = None,
    ):
        self.frames = frames
        self.seconds = seconds
        self.enter_total = enter_total
        self.exit_total = exit_total
        self.events = events
        self.report = report

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.line()})"

    @property
    def fps(self) -> float:
        """
        Processed frames per second, or ``0.0`` for an empty run.

        :type: float
        """
        return self.frames / self.seconds if self.seconds > 0 else 0.0

    @property
    def occupancy(self) -> int:
        """
        Entries minus exits.

        :type: int
        """
        return self.enter_total - self.exit_total

    def line(self) -> str:
        """
        The one-line run summary printed by the command-line tool.
        """
        text = (
            f"frames={self.frames} enter={self.enter_total} exit={self.exit_total} "
            f"occupancy={self.occupancy} fps={self.fps:.1f}"
        )
        if self.report is not None:
            text += f" average_f1={self.report.average_f1_text}"
        return text


def _open_input(
    config: PipelineConfig,
) -> Tuple[FrameStream, Optional[List[GroundTruthEvent]], Optional[Tuple[Any, Any]]]:
    # returns the stream, the generated truth and the line hint
    if config.source == InputSource.Synth:
        spec = preset(config.preset, config.seed, width=config.width, height=config.height)
        stream, truth = generate_scene(spec)
        return stream, truth, spec.line
    assert config.input_path is not None
    if config.source == InputSource.Y4M:
        return open_y4m(config.input_path), None, None
    return open_pgm_sequence(config.input_path, config.pattern), None, None


def _process_stream(
    config: PipelineConfig,
    stream: FrameStream,
    line: CountingLine,
    *,
    write: bool,
) -> Tuple[Pipeline, float]:
    out = config.output_dir
    pipeline = Pipeline(config, stream.width, stream.height, stream.channels, line)
    rows: List[TrackRow] = []
    if write and config.mask_every > 0:
        (out / "masks").mkdir(parents=True, exist_ok=True)
    start = perf_counter()
    with stream:
        for frame in stream:
            cleaned, tracks, _ = pipeline.process(frame)
            if not write:
                continue
            if config.track_csv:
                rows.extend(track_rows(tracks, frame.index))
            if config.mask_every > 0 and frame.index % config.mask_every == 0:
                write_pgm(cleaned.to_mask(), out / "masks" / f"{frame.index:06d}.pgm")
    seconds = perf_counter() - start
    pipeline.check_totals()
    if write:
        if config.track_csv:
            write_track_csv(rows, out / "tracks.csv")
        if config.dump_background and pipeline.frames > 0:
            background = pipeline.model.background_image()
            if background.channels == 1:
                write_pgm(background, out / "background.pgm")
            else:
                write_ppm(background, out / "background.ppm")
    return pipeline, seconds


def run_count(config: PipelineConfig) -> RunSummary:
    """
    Runs the full counting pipeline over the configured input.

    Writes ``events.csv`` and the effective ``config.ini`` into the output directory, plus
    ``report.json`` when ground truth is available (a configured ground truth file, or the
    generated truth of a synthetic scene), and the optional debug artifacts.

    Parameters
    ----------
    config : PipelineConfig
        The run configuration.

    Returns
    -------
    RunSummary
        The run summary.

    Raises
    ------
    ConfigError
        No counting line is configured for file input.
    FormatError
        The input couldn't be decoded.
    OSError
        The input couldn't be opened, or the outputs couldn't be written.
    """
    stream, truth, hint = _open_input(config)
    line = config.counting_line(hint)
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    config.write(out / "config.ini")
    logger.info(f"Counting {stream!r} against {line!r}")
    pipeline, seconds = _process_stream(config, stream, line, write=True)
    events = pipeline.events
    write_events_csv(events, out / "events.csv")
    if config.ground_truth is not None:
        truth = read_truth_csv(config.ground_truth)
    report: Optional[MetricsReport] = None
    if truth is not None:
        report = render_report(
            match_events(events, truth, config.tolerance_frames), config.p0
        )
        write_report(report, out / "report.json")
    summary = RunSummary(
        pipeline.frames,
        seconds,
        pipeline.counter.enter_total,
        pipeline.counter.exit_total,
        events,
        report,
    )
    logger.info(f"Run finished: {summary.line()}")
    return summary


def run_synth(
    preset_name: str,
    seed: int,
    output_dir: PathLike,
    *,
    width: int = 320,
    height: int = 240,
) -> Tuple[List[Path], Path]:
    """
    Renders a synthetic scene preset to disk, as a PGM sequence and a ground truth CSV.

    Returns
    -------
    Tuple[List[Path], Path]
        The frame paths and the ground truth path.

    Raises
    ------
    UnknownPreset
        The preset name isn't known.
    OSError
        The output directory isn't writable.
    """
    return export_scene(preset(preset_name, seed, width=width, height=height), output_dir)


def run_eval(
    predicted_csv: PathLike,
    truth_csv: PathLike,
    tolerance: int = 15,
    *,
    p0: float = 0.05,
    output_dir: Optional[PathLike] = None,
) -> MetricsReport:
    """
    Re-scores a previously written ``events.csv`` against a ground truth file, without
    touching any video.

    Parameters
    ----------
    predicted_csv : Union[str, Path]
        The events file.
    truth_csv : Union[str, Path]
        The ground truth file.
    tolerance : int
        The event matching tolerance, in frames.\n
        Defaults to ``15``.
    p0 : float
        The significance test null hypothesis error probability.\n
        Defaults to ``0.05``.
    output_dir : Optional[Union[str, Path]]
        Where to write ``report.json``. Nothing is written if not provided.

    Raises
    ------
    FormatError
        A CSV row couldn't be parsed. The line number is included.
    """
    predicted = read_events_csv(predicted_csv)
    truth = read_truth_csv(truth_csv)
    # events.csv is written in frame order, but a hand-edited file might not be
    predicted.sort(key=lambda e: e.frame_index)
    report = render_report(match_events(predicted, truth, tolerance), p0)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, out / "report.json")
    return report


class BenchReport:
    """
    Throughput measurements of the processing chain.

    Attributes
    ----------
    frames : int
        Frames processed per repeat.
    size : Tuple[int, int]
        The ``(width, height)`` frame size.
    fps : List[float]
        The frame rate of every repeat.
    stage_ms : Dict[str, float]
        Per-stage milliseconds, averaged over the repeats.
    wall_ms : float
        Processing wall time in milliseconds, averaged over the repeats.
    """
    def __init__(
        self,
        frames: int,
        size: Tuple[int, int],
        fps: List[float],
        stage_ms: Dict[str, float],
        wall_ms: float,
    ):
        self.frames = frames
        self.size = size
        self.fps = fps
        self.stage_ms = stage_ms
        self.wall_ms = wall_ms

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(fps_mean={self.fps_mean:.1f}, repeats={len(self.fps)})"

    @property
    def fps_mean(self) -> float:
        return fmean(self.fps)

    @property
    def fps_min(self) -> float:
        return min(self.fps)

    @property
    def meets_target(self) -> bool:
        """
        Whether the mean frame rate reaches 30 frames per second.

        :type: bool
        """
        return self.fps_mean >= TARGET_FPS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frames": self.frames,
            "width": self.size[0],
            "height": self.size[1],
            "fps": self.fps,
            "fps_mean": self.fps_mean,
            "fps_min": self.fps_min,
            "stage_ms": self.stage_ms,
            "wall_ms": self.wall_ms,
            "target_fps": TARGET_FPS,
            "meets_target": self.meets_target,
        }

    def table(self) -> str:
        lines = [
            f"{self.frames} frames at {self.size[0]}x{self.size[1]}, {len(self.fps)} repeat(s)",
            f"fps mean {self.fps_mean:.1f}, min {self.fps_min:.1f} "
            f"(target {TARGET_FPS:g}: {'met' if self.meets_target else 'missed'})",
        ]
        for name, ms in self.stage_ms.items():
            lines.append(f"  {name:<12}{ms:10.1f} ms")
        lines.append(f"  {'wall':<12}{self.wall_ms:10.1f} ms")
        return "\n".join(lines)


def run_bench(config: PipelineConfig, repeat: int = 1) -> BenchReport:
    """
    Measures the processing throughput over the configured input.

    Frames are decoded up front, so only processing is timed. Every repeat starts from
    fresh model, tracker and counter state. Nothing is written to disk.

    Parameters
    ----------
    config : PipelineConfig
        The run configuration.
    repeat : int
        The amount of timed runs.\n
        Defaults to ``1``.

    Raises
    ------
    ValueError
        ``repeat`` is less than ``1``.
    """
    if repeat < 1:
        raise ValueError(f"repeat has to be at least 1, got {repeat}")
    stream, _, hint = _open_input(config)
    line = config.counting_line(hint)
    with stream:
        frames = list(stream)
        size = (stream.width, stream.height)
        channels = stream.channels
    fps: List[float] = []
    stage_totals = {name: 0.0 for name in STAGES}
    wall_total = 0.0
    for _ in range(repeat):
        pipeline = Pipeline(config, size[0], size[1], channels, line)
        start = perf_counter()
        for frame in frames:
            pipeline.process(frame)
        wall = perf_counter() - start
        wall_total += wall
        fps.append(len(frames) / wall if wall > 0 else 0.0)
        for name, ms in pipeline.timer.milliseconds().items():
            stage_totals[name] += ms
    report = BenchReport(
        len(frames),
        size,
        fps,
        {name: ms / repeat for name, ms in stage_totals.items()},
        wall_total * 1000 / repeat,
    )
    if not report.meets_target:
        logger.warning(
            f"Throughput target missed: {report.fps_mean:.1f} fps < {TARGET_FPS:g} fps"
        )
    return report


class SuiteRow:
    """
    Mean results of a single scenario over all seeds, as fractions.
    """
    def __init__(self, people: int, enter_f1: float, exit_f1: float, average_f1: float):
        self.people = people
        self.enter_f1 = enter_f1
        self.exit_f1 = exit_f1
        self.average_f1 = average_f1

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.people}: {self.average_f1:.4f})"


def _scenario(config: PipelineConfig, preset_name: str, seed: int) -> PipelineConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict({s: dict(config.parser.items(s)) for s in config.parser.sections()})
    parser.set("input", "source", "synth")
    parser.set("input", "path", "")
    parser.set("input", "preset", preset_name)
    parser.set("input", "seed", str(seed))
    return PipelineConfig(parser)


def _score_scene(config: PipelineConfig) -> MetricsReport:
    stream, truth, hint = _open_input(config)
    assert truth is not None
    line = config.counting_line(hint)
    pipeline, _ = _process_stream(config, stream, line, write=False)
    return render_report(match_events(pipeline.events, truth, config.tolerance_frames), config.p0)


def run_suite(
    seeds: Iterable[int] = range(10),
    counts: Sequence[int] = SUITE_COUNTS,
    config: Optional[PipelineConfig] = None,
) -> List[SuiteRow]:
    """
    Runs the ``n_people(n)`` scenarios over a range of seeds, averaging the F1 scores.
    Nothing is written to disk.

    Parameters
    ----------
    seeds : Iterable[int]
        The scene seeds.\n
        Defaults to ``0-9``.
    counts : Sequence[int]
        The amounts of people to run scenarios for.\n
        Defaults to ``2``, ``4`` and ``10``.
    config : Optional[PipelineConfig]
        The base configuration. Input settings other than the frame size are replaced.

    Returns
    -------
    List[SuiteRow]
        One row per scenario, in ``counts`` order.
    """
    if config is None:
        config = default_config()
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is needed")
    rows: List[SuiteRow] = []
    for people in counts:
        reports: List[MetricsReport] = []
        for seed in seeds:
            reports.append(_score_scene(_scenario(config, f"n_people({people})", seed)))
        row = SuiteRow(
            people,
            fmean(r.enter.f1 for r in reports),
            fmean(r.exit.f1 for r in reports),
            fmean(r.average_f1 for r in reports),
        )
        logger.info(f"Scenario n_people({people}): average F1 {row.average_f1:.4f}")
        rows.append(row)
    return rows
