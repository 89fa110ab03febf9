from __future__ import annotations

import csv
import math
import logging
from pathlib import Path
from typing import Optional, Union, List, Tuple, Sequence, Iterable

import numpy as np
from scipy.spatial.distance import cdist

from .blob import Blob
from .enums import TrackState
from .exceptions import ParameterError, FrameOrderError


__all__ = [
    "TrackerParams",
    "Track",
    "Tracker",
    "tracker_update",
    "track_rows",
    "write_track_csv",
]
logger = logging.getLogger(__package__)
# relative to the frame diagonal
DEFAULT_MATCH_FRACTION = 0.1
TRACK_CSV_HEADER = ("frame_index", "id", "x", "y", "state")
TrackRow = Tuple[int, int, float, float, str]


class TrackerParams:
    """
    Blob association parameters. The attribute names are the canonical ``[tracker]``
    configuration keys.

    Attributes
    ----------
    max_match_distance : Optional[float]
        The largest centroid distance a track can move between frames, in pixels.
        `None` means 10% of the frame diagonal, resolved through `resolve`.
    min_hits : int
        The amount of matched frames needed for a track to become confirmed.\n
        Defaults to ``3``.
    max_missed : int
        The amount of consecutive unmatched frames a track survives.\n
        Defaults to ``10``.
    """
    FIELDS = ("max_match_distance", "min_hits", "max_missed")

    def __init__(
        self,
        *,
        max_match_distance: Optional[float] = None,
        min_hits: int = 3,
        max_missed: int = 10,
    ):
        self.max_match_distance = max_match_distance
        self.min_hits = min_hits
        self.max_missed = max_missed
        self.validate()

    def __repr__(self) -> str:
        args = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.FIELDS)
        return f"{self.__class__.__name__}({args})"

    def validate(self):
        if self.max_match_distance is not None and not self.max_match_distance > 0:
            raise ParameterError("max_match_distance", self.max_match_distance, "has to be > 0")
        if not isinstance(self.min_hits, int) or self.min_hits < 1:
            raise ParameterError("min_hits", self.min_hits, "has to be an integer >= 1")
        if not isinstance(self.max_missed, int) or self.max_missed < 0:
            raise ParameterError("max_missed", self.max_missed, "has to be an integer >= 0")

    def resolve(self, width: int, height: int) -> TrackerParams:
        """
        Returns a copy with the size-relative `max_match_distance` default filled in.
        """
        distance = self.max_match_distance
        if distance is None:
            distance = DEFAULT_MATCH_FRACTION * math.hypot(width, height)
        return TrackerParams(
            max_match_distance=distance, min_hits=self.min_hits, max_missed=self.max_missed
        )


class Track:
    """
    A blob identity persisting across frames.

    Attributes
    ----------
    id : int
        The track ID. IDs start at ``1`` and are never reused within a run.
    history : List[Tuple[int, float, float]]
        ``(frame_index, x, y)`` centroids of every matched frame, in frame order.
    state : TrackState
        The lifecycle state.
    hits : int
        The amount of matched frames.
    missed : int
        The amount of consecutive unmatched frames.
    """
    def __init__(self, track_id: int, frame_index: int, centroid: Tuple[float, float]):
        self.id: int = track_id
        self.history: List[Tuple[int, float, float]] = [(frame_index, *centroid)]
        self.state: TrackState = TrackState.Tentative
        self.hits: int = 1
        self.missed: int = 0

    def __repr__(self) -> str:
        x, y = self.position
        return (
            f"{self.__class__.__name__}({self.id}: {self.state.name}, "
            f"at=({x:.2f}, {y:.2f}), hits={self.hits}, missed={self.missed})"
        )

    @property
    def position(self) -> Tuple[float, float]:
        """
        The most recent centroid.

        :type: Tuple[float, float]
        """
        _, x, y = self.history[-1]
        return (x, y)

    @property
    def last_frame(self) -> int:
        """
        The frame index of the most recent match.

        :type: int
        """
        return self.history[-1][0]

    @property
    def confirmed(self) -> bool:
        """
        Whether this track is confirmed.

        :type: bool
        """
        return self.state == TrackState.Confirmed


class Tracker:
    """
    Greedy nearest-neighbor blob tracker.

    Parameters
    ----------
    params : TrackerParams
        The tracker parameters. `max_match_distance` has to be resolved already.

    Attributes
    ----------
    tracks : List[Track]
        The currently active tracks, in ID order.
    last_frame : Optional[int]
        The most recent frame index seen, `None` before the first update.
    """
    def __init__(self, params: TrackerParams):
        if params.max_match_distance is None:
            raise ParameterError(
                "max_match_distance", None, "has to be resolved against the frame size first"
            )
        self.params = params
        self.tracks: List[Track] = []
        self.last_frame: Optional[int] = None
        self._next_id = 1

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(active={len(self.tracks)}, next_id={self._next_id})"

    def _spawn(self, frame_index: int, blob: Blob) -> Track:
        track = Track(self._next_id, frame_index, blob.centroid)
        self._next_id += 1
        if track.hits >= self.params.min_hits:
            track.state = TrackState.Confirmed
        return track

    def _assign(self, blobs: Sequence[Blob]) -> List[Tuple[int, int]]:
        # returns (track position, blob position) pairs
        if not self.tracks or not blobs:
            return []
        distances = cdist(
            np.array([t.position for t in self.tracks]),
            np.array([b.centroid for b in blobs]),
        )
        ti, bi = np.nonzero(distances <= self.params.max_match_distance)
        ids = np.array([t.id for t in self.tracks])
        order = np.lexsort((bi, ids[ti], distances[ti, bi]))
        pairs: List[Tuple[int, int]] = []
        claimed_tracks, claimed_blobs = set(), set()
        for k in order:
            t, b = int(ti[k]), int(bi[k])
            if t in claimed_tracks or b in claimed_blobs:
                continue
            claimed_tracks.add(t)
            claimed_blobs.add(b)
            pairs.append((t, b))
        return pairs

    def update(self, blobs: Sequence[Blob], frame_index: int) -> List[Track]:
        """
        Associates this frame's blobs with the active tracks.

        Candidate pairs within ``max_match_distance`` are accepted in ascending distance
        order (ties broken by the lower track ID, then the lower blob index), as long as
        neither side has been claimed yet. Unmatched blobs start new tentative tracks.

        Parameters
        ----------
        blobs : Sequence[Blob]
            The blobs found in this frame.
        frame_index : int
            The frame index. Has to be greater than the previous one.

        Returns
        -------
        List[Track]
            The active tracks after the update, in ID order.

        Raises
        ------
        FrameOrderError
            The frame index didn't increase.
        """
        if self.last_frame is not None and frame_index <= self.last_frame:
            raise FrameOrderError(self.last_frame, frame_index)
        self.last_frame = frame_index
        p = self.params
        pairs = self._assign(blobs)
        matched_tracks = {t for t, _ in pairs}
        matched_blobs = {b for _, b in pairs}
        for t, b in pairs:
            track = self.tracks[t]
            track.history.append((frame_index, *blobs[b].centroid))
            track.hits += 1
            track.missed = 0
            if track.state == TrackState.Tentative and track.hits >= p.min_hits:
                track.state = TrackState.Confirmed
        active: List[Track] = []
        for t, track in enumerate(self.tracks):
            if t not in matched_tracks:
                track.missed += 1
                if track.missed > p.max_missed:
                    track.state = TrackState.Lost
                    logger.debug(f"tracker.update(frame={frame_index}) -> track {track.id} lost")
                    continue
            active.append(track)
        for b, blob in enumerate(blobs):
            if b not in matched_blobs:
                active.append(self._spawn(frame_index, blob))
        self.tracks = active
        logger.debug(
            f"tracker.update(frame={frame_index}, blobs={len(blobs)}) -> {len(active)} active"
        )
        return list(active)


def tracker_update(tracker: Tracker, blobs: Sequence[Blob], frame_index: int) -> List[Track]:
    """
    Advances the tracker by one frame. See `Tracker.update`.
    """
    return tracker.update(blobs, frame_index)


def track_rows(tracks: Iterable[Track], frame_index: int) -> List[TrackRow]:
    """
    Flattens the tracks matched in the given frame into CSV rows.
    Tracks coasting through a missed frame are skipped.
    """
    return [
        (frame_index, t.id, *t.position, t.state.slug)
        for t in tracks
        if t.last_frame == frame_index
    ]


def write_track_csv(rows: Iterable[TrackRow], path: Union[str, Path]):
    """
    Writes track rows with the ``frame_index,id,x,y,state`` header.
    """
    with open(path, "w", newline='') as file:
        writer = csv.writer(file)
        writer.writerow(TRACK_CSV_HEADER)
        for frame_index, track_id, x, y, state in rows:
            writer.writerow((frame_index, track_id, f"{x:.3f}", f"{y:.3f}", state))
