from __future__ import annotations

import json
import math
from collections import Counter
from pathlib import Path
from typing import List

import numpy as np
import pytest

from boothcount import (
    Direction,
    CrossingEvent,
    GroundTruthEvent,
    ConfusionCounts,
    MetricsReport,
    FormatError,
    match_events,
    precision,
    recall,
    f1,
    average_f1,
    significance_test,
    render_report,
    write_report,
    read_truth_csv,
    write_truth_csv,
)

from .conftest import SEEDS, ENTER_COUNTS, EXIT_COUNTS, EXIT_COUNTS_LITERAL, AVERAGE_F1


pytestmark = [pytest.mark.evaluation, pytest.mark.base()]


def _predicted(*frames: int, direction: Direction = Direction.Enter) -> List[CrossingEvent]:
    return [CrossingEvent(f, i, direction, (0.0, 0.0)) for i, f in enumerate(frames, start=1)]


def _truth(*frames: int, direction: Direction = Direction.Enter) -> List[GroundTruthEvent]:
    return [GroundTruthEvent(f, direction) for f in frames]


def _binomial_p_value(errors: int, events: int, p0: float) -> float:
    # sums the probabilities of every outcome at most as likely as the observed one
    pmf = [math.comb(events, k) * p0 ** k * (1 - p0) ** (events - k) for k in range(events + 1)]
    observed = pmf[errors] * (1 + 1e-7)
    return min(1.0, sum(p for p in pmf if p <= observed))


def test_match_events():
    # both within the window
    counts = match_events(_predicted(100, 200), _truth(103, 198), 15)
    assert counts[Direction.Enter] == ConfusionCounts(2, 0, 0)
    assert counts[Direction.Exit] == ConfusionCounts(0, 0, 0)
    # outside of the window
    counts = match_events(_predicted(100), _truth(130), 15)
    assert counts[Direction.Enter] == ConfusionCounts(0, 1, 1)
    # the window is inclusive
    counts = match_events(_predicted(100), _truth(115), 15)
    assert counts[Direction.Enter] == ConfusionCounts(1, 0, 0)
    # directions don't mix
    counts = match_events(_predicted(100), _truth(100, direction=Direction.Exit), 15)
    assert counts[Direction.Enter] == ConfusionCounts(0, 1, 0)
    assert counts[Direction.Exit] == ConfusionCounts(0, 0, 1)
    # a truth event is only matched once
    counts = match_events(_predicted(100, 101), _truth(100), 15)
    assert counts[Direction.Enter] == ConfusionCounts(1, 1, 0)


def test_match_thirty():
    frames = list(range(100, 3100, 100))
    counts = match_events(_predicted(*frames), _truth(*(f + 4 for f in frames)))
    assert counts[Direction.Enter] == ConfusionCounts(*ENTER_COUNTS)


def test_match_errors():
    with pytest.raises(ValueError):
        match_events(_predicted(200, 100), _truth())
    with pytest.raises(ValueError):
        match_events(_predicted(), _truth(5, 1))
    with pytest.raises(ValueError):
        match_events(_predicted(), _truth(), -1)


@pytest.mark.parametrize("seed", SEEDS)
def test_match_properties(seed: int):
    rng = np.random.default_rng(seed)
    pred_frames = sorted(rng.integers(0, 300, int(rng.integers(0, 20))).tolist())
    truth_frames = sorted(rng.integers(0, 300, int(rng.integers(0, 20))).tolist())
    counts = match_events(_predicted(*pred_frames), _truth(*truth_frames), 10)[Direction.Enter]
    assert counts.predicted == len(pred_frames)
    assert counts.actual == len(truth_frames)
    assert counts.tp <= min(len(pred_frames), len(truth_frames))
    # a zero tolerance matches exact frames only
    exact = match_events(_predicted(*pred_frames), _truth(*truth_frames), 0)[Direction.Enter]
    common = Counter(pred_frames) & Counter(truth_frames)
    assert exact.tp == sum(common.values())
    # widening the window never loses matches
    assert counts.tp >= exact.tp


def test_metrics():
    enter = ConfusionCounts(*ENTER_COUNTS)
    assert precision(enter) == recall(enter) == f1(enter) == 1.0
    exit = ConfusionCounts(*EXIT_COUNTS)
    assert precision(exit) == pytest.approx(29 / 30)
    assert recall(exit) == 1.0
    assert f1(exit) == pytest.approx(58 / 59)
    assert exit.f1_text == "98.31%"
    literal = ConfusionCounts(*EXIT_COUNTS_LITERAL)
    assert recall(literal) == pytest.approx(29 / 30)
    assert f1(literal) == pytest.approx(29 / 30)
    # empty denominators
    assert precision(ConfusionCounts(0, 0, 5)) == 1.0
    assert recall(ConfusionCounts(0, 5, 0)) == 1.0
    assert f1(ConfusionCounts(0, 5, 5)) == 0.0
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0)


@pytest.mark.parametrize("seed", SEEDS)
def test_f1_properties(seed: int):
    rng = np.random.default_rng(seed)
    tp, fp, fn = (int(v) for v in rng.integers(0, 50, 3))
    counts = ConfusionCounts(tp + 1, fp, fn)
    # symmetric in the two kinds of error
    assert f1(counts) == pytest.approx(f1(ConfusionCounts(tp + 1, fn, fp)))
    # the harmonic mean never exceeds the geometric one
    p, r = precision(counts), recall(counts)
    assert f1(counts) <= math.sqrt(p * r) + 1e-12
    assert min(p, r) - 1e-12 <= f1(counts) <= max(p, r) + 1e-12


def test_confusion_counts():
    counts = ConfusionCounts(1, 2, 3) + ConfusionCounts(4, 5, 6)
    assert counts == ConfusionCounts(5, 7, 9)
    assert (counts.predicted, counts.actual) == (12, 14)
    assert set(counts.to_dict()) == {"tp", "fp", "fn", "precision", "recall", "f1"}
    assert repr(counts) == "ConfusionCounts(tp=5, fp=7, fn=9)"


def test_average_f1():
    assert average_f1(1.0, 0.983) == pytest.approx(0.9915)
    assert average_f1(1.0, 1.0) == 1.0
    assert average_f1(0.0, 1.0) == 0.5
    with pytest.raises(ValueError):
        average_f1(1.2, 1.0)
    with pytest.raises(ValueError):
        average_f1(0.5, -0.1)


def test_significance():
    assert significance_test(0, 30, 0.05) == pytest.approx(_binomial_p_value(0, 30, 0.05))
    assert significance_test(30, 30, 0.05) < 1e-30
    # no events, no evidence
    assert significance_test(0, 0) == 1.0
    for errors, events in ((1, 60), (3, 60), (12, 40)):
        assert significance_test(errors, events) == pytest.approx(
            _binomial_p_value(errors, events, 0.05)
        )
    with pytest.raises(ValueError):
        significance_test(31, 30)
    with pytest.raises(ValueError):
        significance_test(-1, 30)
    with pytest.raises(ValueError):
        significance_test(1, 30, 1.0)


def test_report():
    report = render_report({
        Direction.Enter: ConfusionCounts(*ENTER_COUNTS),
        Direction.Exit: ConfusionCounts(*EXIT_COUNTS),
    })
    assert report.enter.f1 == 1.0
    assert report.exit.f1 == pytest.approx(58 / 59)
    assert report.average_f1 == pytest.approx(AVERAGE_F1)
    assert report.average_f1_text == "99.15%"
    assert report.overall == ConfusionCounts(59, 1, 0)
    assert (report.errors, report.events) == (1, 60)
    data = report.to_dict()
    assert data["accuracy"] == {"enter": 100.0, "exit": 98.31, "overall": 99.15}
    # the pooled F1 isn't the per-direction average
    assert data["overall"]["f1"] == pytest.approx(118 / 119)
    assert data["overall"]["f1"] != pytest.approx(data["average_f1"], abs=1e-6)
    assert round(data["accuracy"]["exit"], 1) == 98.3
    assert data["significance"]["p_value"] == pytest.approx(_binomial_p_value(1, 60, 0.05))
    table = report.table()
    assert "Entering" in table
    assert table.endswith("Overall counting average: 99.15%")


def test_report_edge_cases():
    # nothing happened, and nothing was predicted
    report = render_report({})
    assert report.enter == report.exit == ConfusionCounts()
    assert report.enter.f1 == report.exit.f1 == report.average_f1 == 1.0
    assert report.p_value == 1.0
    # one of each outcome per direction
    report = MetricsReport(ConfusionCounts(1, 1, 1), ConfusionCounts(1, 1, 1))
    for counts in (report.enter, report.exit):
        assert counts.precision == counts.recall == counts.f1 == 0.5
    assert report.average_f1 == 0.5


def test_write_report(tmp_path: Path):
    report = render_report({Direction.Enter: ConfusionCounts(3, 0, 1)}, p0=0.1)
    path = tmp_path / "report.json"
    write_report(report, path)
    data = json.loads(path.read_text())
    assert data["enter"]["tp"] == 3
    assert data["significance"]["p0"] == 0.1
    assert set(data) == {"enter", "exit", "overall", "average_f1", "significance", "accuracy"}


def test_truth_csv(tmp_path: Path):
    events = [
        GroundTruthEvent(10, Direction.Enter),
        GroundTruthEvent(10, Direction.Exit),
        GroundTruthEvent(52, Direction.Exit),
    ]
    path = tmp_path / "truth.csv"
    write_truth_csv(events, path)
    assert path.read_text().splitlines() == ["frame,direction", "10,enter", "10,exit", "52,exit"]
    assert read_truth_csv(path) == events
    # aliases are accepted when reading
    path.write_text("frame,direction\n3,in\n9,out\n")
    assert read_truth_csv(path) == [
        GroundTruthEvent(3, Direction.Enter), GroundTruthEvent(9, Direction.Exit)
    ]


def test_truth_csv_errors(tmp_path: Path):
    path = tmp_path / "truth.csv"
    path.write_text("frame,dir\n")
    with pytest.raises(FormatError) as exc_info:
        read_truth_csv(path)
    assert exc_info.value.line == 1
    path.write_text("frame,direction\n20,enter\n10,exit\n")
    with pytest.raises(FormatError, match="sorted") as exc_info:
        read_truth_csv(path)
    assert exc_info.value.line == 3
    path.write_text("frame,direction\nten,enter\n")
    with pytest.raises(FormatError):
        read_truth_csv(path)
