from __future__ import annotations

from pathlib import Path
from typing import List, Tuple

import numpy as np
import pytest

import boothcount


pytest_plugins = ["pytest_cov"]

#####################
# Testing constants #
#####################

# property test seeds - every property test is parametrized over these
SEEDS = list(range(25))

# small frame size, for tests that don't care about the size-relative defaults
SMALL = (32, 24)

# confusion counts of a 30 entries, 30 exits run scoring 100% / 98.31% / 99.15%
ENTER_COUNTS = (30, 0, 0)
EXIT_COUNTS = (29, 1, 0)
# one extra missed exit on top of EXIT_COUNTS
EXIT_COUNTS_LITERAL = (29, 1, 1)
AVERAGE_F1 = (1.0 + 58 / 59) / 2  # 0.99152...

# a short horizontal line, used by most counter tests
LINE = ((0.0, 0.0), (10.0, 0.0))


def constant_frame(level: int, size: Tuple[int, int] = SMALL, index: int = 0) -> boothcount.Frame:
    width, height = size
    return boothcount.Frame(np.full((height, width), level, dtype=np.uint8), index)


def random_frames(
    seed: int, count: int, size: Tuple[int, int] = SMALL, channels: int = 1
) -> List[boothcount.Frame]:
    rng = np.random.default_rng(seed)
    width, height = size
    shape = (height, width) if channels == 1 else (height, width, channels)
    return [
        boothcount.Frame(rng.integers(0, 256, shape, dtype=np.uint8), i) for i in range(count)
    ]


def make_track(
    track_id: int, frame_index: int, x: float, y: float, *, confirmed: bool = True
) -> boothcount.Track:
    track = boothcount.Track(track_id, frame_index, (x, y))
    if confirmed:
        track.state = boothcount.TrackState.Confirmed
    return track


def move_track(track: boothcount.Track, frame_index: int, x: float, y: float):
    track.history.append((frame_index, x, y))
    track.hits += 1


@pytest.fixture()
def line() -> boothcount.CountingLine:
    return boothcount.CountingLine(*LINE, enter_sign=-1, hysteresis=5, debounce=0)


# a fresh, empty output directory per test
@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    path = tmp_path / "out"
    path.mkdir()
    return path


# the single_cross scene is used by many pipeline tests, render it once per session
@pytest.fixture(scope="session")
def single_cross_dir(tmp_path_factory: pytest.TempPathFactory) -> Tuple[Path, Path]:
    directory = tmp_path_factory.mktemp("single_cross")
    paths, truth = boothcount.run_synth("single_cross", 7, directory)
    return directory, truth
