from __future__ import annotations

import re
import math
import logging
from pathlib import Path
from typing import Optional, Union, List, Tuple, Sequence

import numpy as np

from .enums import Direction
from .counter import CountingLine
from .video_io import MIN_SIZE, FrameStream, write_pgm, write_ppm
from .evaluation import GroundTruthEvent, write_truth_csv
from .exceptions import ParameterError, UnknownPreset


__all__ = [
    "ActorSpec",
    "SceneSpec",
    "SyntheticStream",
    "PRESETS",
    "render_frame",
    "ground_truth",
    "generate_scene",
    "preset",
    "export_scene",
]
logger = logging.getLogger(__package__)
PRESETS = ("single_cross", "n_people(n)", "occlusion_pair", "lighting_drift")
_N_PEOPLE_RE = re.compile(r"n_people\s*(?:\(\s*(\d+)\s*\))?$")
Waypoint = Tuple[int, float, float]
Point = Tuple[float, float]

# preset geometry, relative to the frame size
WARMUP_FRAMES = 150
STAGGER_FRAMES = 30
TAIL_FRAMES = 30
PATH_START = 0.15
PATH_END = 0.85
SPEED_RANGE = (3.5, 5.0)
LANE_JITTER = 8.0
BACKGROUND_LEVEL = 100
ACTOR_LEVEL = 200
NOISE_SIGMA = 3.0


class ActorSpec:
    """
    A filled ellipse moving along a piecewise linear path.

    Attributes
    ----------
    spawn_frame : int
        The first frame the actor is visible in.
    despawn_frame : int
        The first frame the actor is no longer visible in.
    axes : Tuple[float, float]
        The horizontal and vertical semi-axes, in pixels.
    intensity : int
        The actor's gray level.
    waypoints : List[Tuple[int, float, float]]
        ``(frame_index, x, y)`` centroid positions, interpolated linearly. The first one is at
        `spawn_frame` and the last one at `despawn_frame`.
    """
    def __init__(
        self,
        spawn_frame: int,
        despawn_frame: int,
        axes: Tuple[float, float],
        intensity: int,
        waypoints: Sequence[Waypoint],
    ):
        self.spawn_frame = spawn_frame
        self.despawn_frame = despawn_frame
        self.axes = (float(axes[0]), float(axes[1]))
        self.intensity = intensity
        self.waypoints: List[Waypoint] = [(int(f), float(x), float(y)) for f, x, y in waypoints]

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.spawn_frame}-{self.despawn_frame}, "
            f"waypoints={len(self.waypoints)})"
        )

    def visible(self, frame_index: int) -> bool:
        return self.spawn_frame <= frame_index < self.despawn_frame

    def position(self, frame_index: float) -> Point:
        """
        The interpolated centroid at the given (possibly fractional) frame.
        Positions outside of the waypoint range are clamped to the ends.
        """
        points = self.waypoints
        if frame_index <= points[0][0]:
            return points[0][1:]
        for (f0, x0, y0), (f1, x1, y1) in zip(points, points[1:]):
            if frame_index <= f1:
                t = (frame_index - f0) / (f1 - f0)
                return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))
        return points[-1][1:]

    def validate(self, width: int, height: int):
        if self.spawn_frame < 0 or self.spawn_frame >= self.despawn_frame:
            raise ParameterError(
                "spawn_frame", (self.spawn_frame, self.despawn_frame),
                "has to be >= 0 and before despawn_frame",
            )
        if min(self.axes) <= 0:
            raise ParameterError("axes", self.axes, "have to be positive")
        if not 0 <= self.intensity <= 255:
            raise ParameterError("intensity", self.intensity, "has to be in 0-255")
        frames = [f for f, _, _ in self.waypoints]
        if len(frames) < 2 or any(a >= b for a, b in zip(frames, frames[1:])):
            raise ParameterError("waypoints", frames, "frame indices have to strictly increase")
        if frames[0] != self.spawn_frame or frames[-1] != self.despawn_frame:
            raise ParameterError(
                "waypoints", (frames[0], frames[-1]), "have to span spawn_frame to despawn_frame"
            )
        for _, x, y in self.waypoints:
            if not (0 <= x <= width and 0 <= y <= height):
                raise ParameterError("waypoints", (x, y), "outside of the frame")


class SceneSpec:
    """
    A fully described synthetic scene.

    Attributes
    ----------
    width : int
    height : int
        The frame size.
    frame_count : int
        The amount of frames.
    background_level : float
        The background gray level at the first frame.
    noise_sigma : float
        Standard deviation of the per-pixel Gaussian noise.
    line : Tuple[Tuple[float, float], Tuple[float, float]]
        The counting line endpoints, used for the ground truth and as the pipeline's
        line hint.
    enter_sign : int
        The side the line is entered from, see `CountingLine`.
    actors : List[ActorSpec]
        The moving actors.
    seed : int
        The noise seed.
    background_ramp : float
        The total background level change over the scene, applied linearly.\n
        Defaults to ``0``.
    channels : int
        ``1`` for grayscale, ``3`` for RGB frames.\n
        Defaults to ``1``.
    """
    def __init__(
        self,
        *,
        width: int,
        height: int,
        frame_count: int,
        background_level: float,
        noise_sigma: float,
        line: Tuple[Point, Point],
        enter_sign: int = -1,
        actors: Sequence[ActorSpec] = (),
        seed: int = 0,
        background_ramp: float = 0.0,
        channels: int = 1,
        name: str = "custom",
    ):
        self.width = width
        self.height = height
        self.frame_count = frame_count
        self.background_level = float(background_level)
        self.noise_sigma = float(noise_sigma)
        self.line = line
        self.enter_sign = enter_sign
        self.actors: List[ActorSpec] = list(actors)
        self.seed = seed
        self.background_ramp = float(background_ramp)
        self.channels = channels
        self.name = name

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.name!r}: {self.width}x{self.height}, "
            f"frames={self.frame_count}, actors={len(self.actors)}, seed={self.seed})"
        )

    def validate(self):
        """
        Raises
        ------
        ParameterError
            A field of the scene or of one of its actors is invalid.
        """
        if self.width < MIN_SIZE or self.height < MIN_SIZE:
            raise ParameterError(
                "size", (self.width, self.height), f"has to be at least {MIN_SIZE}x{MIN_SIZE}"
            )
        if self.frame_count < 1:
            raise ParameterError("frame_count", self.frame_count, "has to be >= 1")
        if self.noise_sigma < 0:
            raise ParameterError("noise_sigma", self.noise_sigma, "has to be >= 0")
        if not 0 <= self.background_level <= 255:
            raise ParameterError("background_level", self.background_level, "has to be in 0-255")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed", self.seed, "has to be an unsigned 64-bit integer")
        if self.channels not in (1, 3):
            raise ParameterError("channels", self.channels, "has to be 1 or 3")
        if self.enter_sign not in (-1, 1):
            raise ParameterError("enter_sign", self.enter_sign, "has to be +1 or -1")
        if self.line[0] == self.line[1]:
            raise ParameterError("line", self.line, "endpoints have to differ")
        for actor in self.actors:
            actor.validate(self.width, self.height)
            if actor.intensity == round(self.background_level):
                raise ParameterError(
                    "intensity", actor.intensity, "has to differ from the background level"
                )

    def level(self, frame_index: int) -> float:
        """
        The background level at the given frame.
        """
        if self.frame_count < 2:
            return self.background_level
        return self.background_level + self.background_ramp * frame_index / (self.frame_count - 1)

    def counting_line(self, **kwargs) -> CountingLine:
        """
        The scene's counting line hint. Keyword arguments are passed to `CountingLine`.
        """
        return CountingLine(self.line[0], self.line[1], enter_sign=self.enter_sign, **kwargs)


def _noise_rng(seed: int, frame_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, frame_index])))


def render_frame(spec: SceneSpec, frame_index: int) -> np.ndarray:
    """
    Renders a single frame of the scene.

    The background is filled with the frame's level, actors visible in this frame are
    painted over it in list order, and then Gaussian noise drawn from a PCG64 generator
    seeded with ``SeedSequence([seed, frame_index])`` is added. Values are rounded half
    to even and clamped to ``0-255``.

    Returns
    -------
    numpy.ndarray
        ``uint8`` samples, shaped ``(height, width)`` or ``(height, width, 3)``.
    """
    h, w = spec.height, spec.width
    image = np.full((h, w), spec.level(frame_index), dtype=np.float64)
    for actor in spec.actors:
        if not actor.visible(frame_index):
            continue
        cx, cy = actor.position(frame_index)
        a, b = actor.axes
        x0, x1 = max(0, math.ceil(cx - a)), min(w - 1, math.floor(cx + a))
        y0, y1 = max(0, math.ceil(cy - b)), min(h - 1, math.floor(cy + b))
        if x0 > x1 or y0 > y1:
            continue
        ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        inside = ((xs - cx) / a) ** 2 + ((ys - cy) / b) ** 2 <= 1
        image[y0:y1 + 1, x0:x1 + 1][inside] = actor.intensity
    if spec.channels == 3:
        image = np.repeat(image[:, :, np.newaxis], 3, axis=2)
    if spec.noise_sigma > 0:
        image += spec.noise_sigma * _noise_rng(spec.seed, frame_index).standard_normal(image.shape)
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


class SyntheticStream(FrameStream):
    """
    A frame stream rendering a synthetic scene lazily, frame by frame.

    Inherits from `FrameStream`.

    Attributes
    ----------
    spec : SceneSpec
        The scene being rendered.
    """
    def __init__(self, spec: SceneSpec):
        super().__init__(
            f"synth:{spec.name}", width=spec.width, height=spec.height, channels=spec.channels
        )
        self.spec = spec

    def __len__(self) -> int:
        return self.spec.frame_count

    def _next_pixels(self, index: int) -> Optional[np.ndarray]:
        if index >= self.spec.frame_count:
            return None
        return render_frame(self.spec, index)


def _side_value(line: Tuple[Point, Point], point: Point) -> float:
    (x1, y1), (x2, y2) = line
    return (x2 - x1) * (point[1] - y1) - (y2 - y1) * (point[0] - x1)


def _actor_crossings(
    actor: ActorSpec, line: Tuple[Point, Point], enter_sign: int
) -> List[GroundTruthEvent]:
    events: List[GroundTruthEvent] = []
    previous_sign = 0
    # the side value is affine along each segment, so a sign change happens where it's zero
    zero_at: Optional[float] = None
    points = actor.waypoints
    values = [_side_value(line, (x, y)) for _, x, y in points]
    for k, value in enumerate(values):
        frame = points[k][0]
        sign = (value > 0) - (value < 0)
        if sign == 0:
            if zero_at is None:
                zero_at = float(frame)
            continue
        if previous_sign != 0 and sign != previous_sign:
            if zero_at is None:
                f0, v0 = points[k - 1][0], values[k - 1]
                zero_at = f0 + (frame - f0) * v0 / (v0 - value)
            direction = Direction.Enter if previous_sign == enter_sign else Direction.Exit
            events.append(GroundTruthEvent(math.floor(zero_at + 0.5), direction))
        previous_sign = sign
        zero_at = None
    return events


def ground_truth(spec: SceneSpec) -> List[GroundTruthEvent]:
    """
    Computes the scene's crossings analytically, out of the actor paths alone.

    Every sign change of an actor's centroid relative to the line counts as one event, at
    the interpolated frame the centroid reaches the line, rounded half up. Centroids exactly
    on the line keep the previous side.

    Returns
    -------
    List[GroundTruthEvent]
        The crossings, sorted by frame.
    """
    events: List[GroundTruthEvent] = []
    for actor in spec.actors:
        events.extend(_actor_crossings(actor, spec.line, spec.enter_sign))
    events.sort(key=lambda e: (e.frame_index, e.direction.value))
    return events


def generate_scene(spec: SceneSpec) -> Tuple[SyntheticStream, List[GroundTruthEvent]]:
    """
    Validates the scene, and returns its frame stream together with its ground truth.
    The same scene always renders the same frames.

    Raises
    ------
    ParameterError
        The scene is invalid.
    """
    spec.validate()
    truth = ground_truth(spec)
    logger.debug(f"synth.generate_scene({spec!r}) -> {len(truth)} events")
    return SyntheticStream(spec), truth


def _transit(
    rng: np.random.Generator,
    width: int,
    height: int,
    spawn: int,
    lane: float,
    downwards: bool,
    speed: Optional[float] = None,
) -> ActorSpec:
    if speed is None:
        speed = float(rng.uniform(*SPEED_RANGE))
    top, bottom = PATH_START * height, PATH_END * height
    frames = math.ceil((bottom - top) / speed)
    start, end = (top, bottom) if downwards else (bottom, top)
    x = min(max(lane, 0.0), float(width))
    return ActorSpec(
        spawn,
        spawn + frames,
        (0.05 * width, 0.09 * height),
        ACTOR_LEVEL,
        [(spawn, x, start), (spawn + frames, x, end)],
    )


def _jitter(rng: np.random.Generator, limit: float = LANE_JITTER) -> float:
    return float(rng.uniform(-limit, limit))


def preset(name: str, seed: int = 0, *, width: int = 320, height: int = 240) -> SceneSpec:
    """
    Builds one of the named scenes.

    All presets use a horizontal line across the middle of the frame, with downward
    movement counting as an entry. Actors spawn after a warmup period, so the background
    model has settled by the time anything moves.

    * ``single_cross``: one actor walks down across the line.
    * ``n_people(n)``: ``n`` actors spawned 30 frames apart, alternating between entering
      and exiting. Every actor walks its own lane, entries in the left half of the frame and
      exits in the right half. ``n_people`` alone means 10.
    * ``occlusion_pair``: two actors in almost the same lane, walking in opposite directions
      and overlapping around the line.
    * ``lighting_drift``: no actors, the background brightens by 40 over the scene.

    Parameters
    ----------
    name : str
        The preset name.
    seed : int
        The seed for the noise and the path jitter.\n
        Defaults to ``0``.
    width : int
    height : int
        The frame size.\n
        Defaults to ``320x240``.

    Raises
    ------
    UnknownPreset
        The preset name isn't known.
    ParameterError
        ``n_people`` was asked for less than one actor.
    """
    key = name.strip().lower()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5EED])))
    line = ((0.0, height / 2), (float(width), height / 2))
    common = dict(
        width=width,
        height=height,
        background_level=BACKGROUND_LEVEL,
        noise_sigma=NOISE_SIGMA,
        line=line,
        enter_sign=-1,
        seed=seed,
    )
    actors: List[ActorSpec]
    if key == "single_cross":
        actors = [_transit(rng, width, height, WARMUP_FRAMES, width / 2 + _jitter(rng), True)]
    elif key == "occlusion_pair":
        speed = float(rng.uniform(*SPEED_RANGE))
        actors = [
            _transit(rng, width, height, WARMUP_FRAMES, width / 2 - 6, True, speed),
            _transit(rng, width, height, WARMUP_FRAMES, width / 2 + 6, False, speed),
        ]
    elif key == "lighting_drift":
        common["noise_sigma"] = 2.0
        return SceneSpec(
            **common,  # type: ignore[arg-type]
            frame_count=300,
            actors=[],
            background_ramp=40.0,
            name=key,
        )
    elif (match := _N_PEOPLE_RE.match(key)) is not None:
        count = int(match.group(1)) if match.group(1) is not None else 10
        if count < 1:
            raise ParameterError("n", count, "n_people needs at least one actor")
        # one lane per actor, entering actors fill the left half and exiting ones the right,
        # so consecutive actors walk far apart and no lane is walked twice
        spacing = width / count
        half = (count + 1) // 2
        actors = []
        for i in range(count):
            entering = i % 2 == 0
            slot = i // 2 + (0 if entering else half)
            lane = (slot + 0.5) * spacing + _jitter(rng, min(LANE_JITTER, spacing / 8))
            actors.append(_transit(
                rng, width, height, WARMUP_FRAMES + STAGGER_FRAMES * i, lane, entering
            ))
        key = f"n_people({count})"
    else:
        raise UnknownPreset(name, PRESETS)
    frame_count = max(a.despawn_frame for a in actors) + TAIL_FRAMES
    return SceneSpec(
        **common,  # type: ignore[arg-type]
        frame_count=frame_count,
        actors=actors,
        name=key,
    )


def export_scene(
    spec: SceneSpec, directory: Union[str, Path]
) -> Tuple[List[Path], Path]:
    """
    Renders the scene into a zero-padded PGM (or PPM) sequence, with a ``truth.csv``
    ground truth file next to it.

    Parameters
    ----------
    spec : SceneSpec
        The scene to export.
    directory : Union[str, Path]
        The output directory. Created if missing.

    Returns
    -------
    Tuple[List[Path], Path]
        The frame paths and the ground truth path.
    """
    stream, truth = generate_scene(spec)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix, writer = (".pgm", write_pgm) if spec.channels == 1 else (".ppm", write_ppm)
    paths: List[Path] = []
    with stream:
        for frame in stream:
            path = directory / f"frame_{frame.index:06d}{suffix}"
            writer(frame, path)
            paths.append(path)
    truth_path = directory / "truth.csv"
    write_truth_csv(truth, truth_path)
    logger.info(f"Exported {len(paths)} frames and {len(truth)} events to {directory}")
    return paths, truth_path
