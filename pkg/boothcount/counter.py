from __future__ import annotations

import csv
import math
import logging
from pathlib import Path
from typing import Optional, Union, List, Dict, Tuple, Iterable, Sequence

from .tracker import Track
from .enums import Direction
from .utils import parse_floats
from .exceptions import ParameterError, FormatError, FrameOrderError


__all__ = [
    "CountingLine",
    "CrossingEvent",
    "CounterState",
    "side_of_line",
    "counter_update",
    "occupancy",
    "write_events_csv",
    "read_events_csv",
]
logger = logging.getLogger(__package__)
EVENTS_CSV_HEADER = ("frame", "track_id", "direction", "x", "y")
Point = Tuple[float, float]


class CountingLine:
    """
    A virtual line crossings are counted against.

    Attributes
    ----------
    p1 : Tuple[float, float]
    p2 : Tuple[float, float]
        The line endpoints. The line is treated as infinite.
    enter_sign : int
        The side sign (``+1`` or ``-1``, see `side_of_line`) a track has to leave for its
        crossing to count as an entry.\n
        Defaults to ``-1``.
    hysteresis : float
        The distance from the line a track has to reach on both sides of a crossing,
        in pixels.\n
        Defaults to ``8``.
    debounce : int
        The minimum amount of frames between two counted crossings of the same track.\n
        Defaults to ``15``.
    """
    FIELDS = ("p1", "p2", "enter_sign", "hysteresis", "debounce")

    def __init__(
        self,
        p1: Point,
        p2: Point,
        *,
        enter_sign: int = -1,
        hysteresis: float = 8.0,
        debounce: int = 15,
    ):
        self.p1: Point = (float(p1[0]), float(p1[1]))
        self.p2: Point = (float(p2[0]), float(p2[1]))
        self.enter_sign = enter_sign
        self.hysteresis = float(hysteresis)
        self.debounce = debounce
        self.validate()

    def __repr__(self) -> str:
        args = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.FIELDS)
        return f"{self.__class__.__name__}({args})"

    @classmethod
    def from_text(cls, text: str, **kwargs) -> CountingLine:
        """
        Creates a line from its ``"x1, y1, x2, y2"`` text form. Keyword arguments
        are passed to the constructor.

        Raises
        ------
        ValueError
            The text isn't four numbers.
        """
        x1, y1, x2, y2 = parse_floats(text, 4)
        return cls((x1, y1), (x2, y2), **kwargs)

    def to_text(self) -> str:
        return ", ".join(f"{v:g}" for v in (*self.p1, *self.p2))

    def validate(self):
        if self.p1 == self.p2:
            raise ParameterError("line", (self.p1, self.p2), "endpoints have to differ")
        if self.enter_sign not in (-1, 1):
            raise ParameterError("enter_sign", self.enter_sign, "has to be +1 or -1")
        if not self.hysteresis >= 0:
            raise ParameterError("hysteresis", self.hysteresis, "has to be >= 0")
        if not isinstance(self.debounce, int) or self.debounce < 0:
            raise ParameterError("debounce", self.debounce, "has to be an integer >= 0")

    @property
    def length(self) -> float:
        """
        The distance between the endpoints.

        :type: float
        """
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    def cross(self, point: Point) -> float:
        """
        The z-component of ``(p2 - p1) x (point - p1)``.
        """
        (x1, y1), (x2, y2) = self.p1, self.p2
        return (x2 - x1) * (point[1] - y1) - (y2 - y1) * (point[0] - x1)

    def side(self, point: Point) -> int:
        """
        The side of the line the point lies on: ``+1``, ``-1``, or ``0`` when collinear.
        """
        z = self.cross(point)
        return (z > 0) - (z < 0)

    def distance(self, point: Point) -> float:
        """
        The perpendicular distance from the point to the line.
        """
        return abs(self.cross(point)) / self.length


class CrossingEvent:
    """
    A single counted crossing.

    Attributes
    ----------
    frame_index : int
        The frame the crossing was counted at.
    track_id : int
        The ID of the crossing track.
    direction : Direction
        The crossing direction.
    position : Tuple[float, float]
        The track's centroid when the crossing was counted.
    """
    def __init__(self, frame_index: int, track_id: int, direction: Direction, position: Point):
        self.frame_index = frame_index
        self.track_id = track_id
        self.direction = direction
        self.position = position

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.frame_index}: "
            f"{self.direction.slug} by {self.track_id})"
        )

    def __eq__(self, other: object) -> bool:
        if isinstance(other, CrossingEvent):
            return (
                self.frame_index == other.frame_index
                and self.track_id == other.track_id
                and self.direction == other.direction
                and self.position == other.position
            )
        return NotImplemented


class _Arming:
    __slots__ = ("side", "counted_at")

    def __init__(self, side: int):
        self.side = side
        self.counted_at: Optional[int] = None


class CounterState:
    """
    Turns confirmed track positions into crossing events.

    A track arms on a side of the line once it's at least ``hysteresis`` away from it.
    Reaching the same distance on the opposite side counts a crossing and re-arms the track
    on the new side. Within ``debounce`` frames of a counted crossing the track can't cross
    again, and keeps its arming. Collinear positions are ignored.

    Parameters
    ----------
    line : CountingLine
        The line to count against.

    Attributes
    ----------
    line : CountingLine
        The line to count against.
    enter_total : int
        The amount of entries counted.
    exit_total : int
        The amount of exits counted.
    last_frame : Optional[int]
        The most recent frame index seen.
    """
    def __init__(self, line: CountingLine):
        self.line = line
        self.enter_total: int = 0
        self.exit_total: int = 0
        self.last_frame: Optional[int] = None
        self._memory: Dict[int, _Arming] = {}

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(enter={self.enter_total}, exit={self.exit_total})"

    @property
    def occupancy(self) -> int:
        """
        Entries minus exits. Negative if more exits than entries were counted.

        :type: int
        """
        return self.enter_total - self.exit_total

    def update(self, tracks: Sequence[Track], frame_index: int) -> List[CrossingEvent]:
        """
        Processes the tracks of a single frame.

        Only confirmed tracks matched in this very frame are considered. Tracks missing from
        the list are forgotten.

        Parameters
        ----------
        tracks : Sequence[Track]
            The active tracks, as returned by the tracker.
        frame_index : int
            The frame index. Has to be greater than the previous one.

        Returns
        -------
        List[CrossingEvent]
            The crossings counted in this frame, in track ID order.

        Raises
        ------
        FrameOrderError
            The frame index didn't increase.
        """
        if self.last_frame is not None and frame_index <= self.last_frame:
            raise FrameOrderError(self.last_frame, frame_index)
        self.last_frame = frame_index
        line = self.line
        events: List[CrossingEvent] = []
        for track in sorted(tracks, key=lambda t: t.id):
            if not track.confirmed or track.last_frame != frame_index:
                continue
            point = track.position
            side = line.side(point)
            if side == 0 or line.distance(point) < line.hysteresis:
                continue
            arming = self._memory.get(track.id)
            if arming is None:
                self._memory[track.id] = _Arming(side)
                continue
            if side == arming.side:
                continue
            if arming.counted_at is not None and frame_index - arming.counted_at < line.debounce:
                continue
            if arming.side == line.enter_sign:
                direction = Direction.Enter
                self.enter_total += 1
            else:
                direction = Direction.Exit
                self.exit_total += 1
            arming.side = side
            arming.counted_at = frame_index
            events.append(CrossingEvent(frame_index, track.id, direction, point))
            logger.debug(
                f"counter.update(frame={frame_index}) -> track {track.id} {direction.slug}"
            )
        present = {t.id for t in tracks}
        for track_id in [i for i in self._memory if i not in present]:
            del self._memory[track_id]
        return events


def side_of_line(point: Point, line: CountingLine) -> int:
    """
    The side of the line the point lies on. See `CountingLine.side`.
    """
    return line.side(point)


def counter_update(
    state: CounterState, tracks: Sequence[Track], frame_index: int
) -> List[CrossingEvent]:
    """
    Counts the crossings of a single frame. See `CounterState.update`.
    """
    return state.update(tracks, frame_index)


def occupancy(state: CounterState) -> int:
    """
    Entries minus exits.
    """
    return state.occupancy


def write_events_csv(events: Iterable[CrossingEvent], path: Union[str, Path]):
    """
    Writes the events with the ``frame,track_id,direction,x,y`` header.
    Directions are spelled ``enter`` and ``exit``.
    """
    with open(path, "w", newline='') as file:
        writer = csv.writer(file)
        writer.writerow(EVENTS_CSV_HEADER)
        for e in events:
            x, y = e.position
            writer.writerow(
                (e.frame_index, e.track_id, e.direction.slug, f"{x:.3f}", f"{y:.3f}")
            )


def read_events_csv(path: Union[str, Path]) -> List[CrossingEvent]:
    """
    Reads events written by `write_events_csv`.

    Raises
    ------
    FormatError
        The header is wrong, or a row couldn't be parsed.
    """
    source = str(path)
    events: List[CrossingEvent] = []
    with open(path, newline='') as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != EVENTS_CSV_HEADER:
            raise FormatError(source, f"expected header {','.join(EVENTS_CSV_HEADER)}", line=1)
        for row in reader:
            if not row:
                continue
            try:
                frame, track_id, direction_text, x, y = row
                direction = Direction(direction_text)
                if direction is None:
                    raise ValueError(f"unknown direction {direction_text!r}")
                events.append(
                    CrossingEvent(int(frame), int(track_id), direction, (float(x), float(y)))
                )
            except ValueError as exc:
                raise FormatError(source, str(exc), line=reader.line_num) from exc
    return events
