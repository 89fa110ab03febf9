from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Union, List, Dict, Iterable, Sequence, Protocol

from scipy import stats

from .enums import Direction
from .utils import group_by, is_sorted
from .mixins import ConfusionMixin
from .exceptions import FormatError


__all__ = [
    "GroundTruthEvent",
    "ConfusionCounts",
    "MetricsReport",
    "match_events",
    "precision",
    "recall",
    "f1",
    "average_f1",
    "significance_test",
    "render_report",
    "read_truth_csv",
    "write_truth_csv",
    "write_report",
]
logger = logging.getLogger(__package__)
TRUTH_CSV_HEADER = ("frame", "direction")
DEFAULT_TOLERANCE = 15
DEFAULT_P0 = 0.05


class _Event(Protocol):
    frame_index: int
    direction: Direction


class GroundTruthEvent:
    """
    A known crossing.

    Attributes
    ----------
    frame_index : int
        The frame the crossing happened at.
    direction : Direction
        The crossing direction.
    """
    def __init__(self, frame_index: int, direction: Direction):
        self.frame_index = frame_index
        self.direction = direction

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.frame_index}: {self.direction.slug})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GroundTruthEvent):
            return (self.frame_index, self.direction) == (other.frame_index, other.direction)
        return NotImplemented


class ConfusionCounts(ConfusionMixin):
    """
    Detection outcomes of a single direction.

    Inherits from `ConfusionMixin`.
    """
    def __init__(self, tp: int = 0, fp: int = 0, fn: int = 0):
        super().__init__(tp=tp, fp=fp, fn=fn)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(tp={self.tp}, fp={self.fp}, fn={self.fn})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ConfusionCounts):
            return (self.tp, self.fp, self.fn) == (other.tp, other.fp, other.fn)
        return NotImplemented

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def _match_direction(predicted: List[int], truth: List[int], tolerance: int) -> ConfusionCounts:
    used = [False] * len(truth)
    start = 0
    tp = 0
    for frame in predicted:
        # truths too early for this prediction are too early for every later one as well
        while start < len(truth) and (used[start] or truth[start] < frame - tolerance):
            start += 1
        for j in range(start, len(truth)):
            if truth[j] > frame + tolerance:
                break
            if not used[j]:
                used[j] = True
                tp += 1
                break
    return ConfusionCounts(tp, len(predicted) - tp, len(truth) - tp)


def match_events(
    predicted: Sequence[_Event], truth: Sequence[_Event], tolerance: int = DEFAULT_TOLERANCE
) -> Dict[Direction, ConfusionCounts]:
    """
    Matches predicted crossings against the ground truth, separately per direction.

    Predictions are walked in frame order, each one matched to the earliest unmatched
    truth event of the same direction within ``tolerance`` frames.

    Parameters
    ----------
    predicted : Sequence[CrossingEvent]
        The predicted events, sorted by frame.
    truth : Sequence[GroundTruthEvent]
        The ground truth events, sorted by frame.
    tolerance : int
        The allowed frame difference between a prediction and its truth event.\n
        Defaults to ``15``.

    Returns
    -------
    Dict[Direction, ConfusionCounts]
        The confusion counts for `Direction.Enter` and `Direction.Exit`.

    Raises
    ------
    ValueError
        An input isn't sorted, or the tolerance is negative.
    """
    if tolerance < 0:
        raise ValueError(f"Tolerance can't be negative: {tolerance}")
    for name, events in (("predicted", predicted), ("truth", truth)):
        if not is_sorted(events, key=lambda e: e.frame_index):
            raise ValueError(f"The {name} events have to be sorted by frame")
    pred_groups = group_by(predicted, lambda e: e.direction)
    truth_groups = group_by(truth, lambda e: e.direction)
    counts: Dict[Direction, ConfusionCounts] = {}
    for direction in (Direction.Enter, Direction.Exit):
        counts[direction] = _match_direction(
            [e.frame_index for e in pred_groups.get(direction, [])],
            [e.frame_index for e in truth_groups.get(direction, [])],
            tolerance,
        )
    logger.debug(f"evaluation.match_events(tolerance={tolerance}) -> {counts}")
    return counts


def precision(counts: ConfusionCounts) -> float:
    """
    ``tp / (tp + fp)``, or ``1.0`` when there were no predictions.
    """
    return counts.precision


def recall(counts: ConfusionCounts) -> float:
    """
    ``tp / (tp + fn)``, or ``1.0`` when there were no actual events.
    """
    return counts.recall


def f1(counts: ConfusionCounts) -> float:
    """
    The harmonic mean of precision and recall, or ``0.0`` when both are zero.
    """
    return counts.f1


def average_f1(f1_enter: float, f1_exit: float) -> float:
    """
    The mean of the per-direction F1 scores.

    Raises
    ------
    ValueError
        A score is outside of ``[0, 1]``.
    """
    for value in (f1_enter, f1_exit):
        if not 0 <= value <= 1:
            raise ValueError(f"F1 scores have to be in [0, 1], got {value}")
    return (f1_enter + f1_exit) / 2


def significance_test(errors: int, events: int, p0: float = DEFAULT_P0) -> float:
    """
    Two-sided exact binomial test of the null hypothesis that each event is miscounted
    with probability ``p0``. Zero events give a p-value of ``1.0``.

    Parameters
    ----------
    errors : int
        The amount of miscounted events.
    events : int
        The amount of events.
    p0 : float
        The null hypothesis error probability, in ``(0, 1)``.\n
        Defaults to ``0.05``.

    Returns
    -------
    float
        The p-value.

    Raises
    ------
    ValueError
        ``errors`` is outside of ``[0, events]``, or ``p0`` is outside of ``(0, 1)``.
    """
    if not 0 <= errors <= events:
        raise ValueError(f"Errors have to be within [0, {events}], got {errors}")
    if not 0 < p0 < 1:
        raise ValueError(f"p0 has to be in (0, 1), got {p0}")
    if events == 0:
        return 1.0
    return float(stats.binomtest(errors, events, p0, alternative="two-sided").pvalue)


class MetricsReport:
    """
    The evaluation outcome of a whole run.

    Attributes
    ----------
    enter : ConfusionCounts
    exit : ConfusionCounts
        The per-direction outcomes.
    overall : ConfusionCounts
        Both directions pooled together.
    average_f1 : float
        The mean of the per-direction F1 scores.
    errors : int
        Miscounted events, ``fp + fn`` over both directions.
    events : int
        All scored events, ``tp + fp + fn`` over both directions.
    p0 : float
        The significance test null hypothesis error probability.
    p_value : float
        The significance test p-value.
    """
    def __init__(self, enter: ConfusionCounts, exit: ConfusionCounts, p0: float = DEFAULT_P0):
        self.enter = enter
        self.exit = exit
        self.overall = enter + exit
        self.average_f1 = average_f1(enter.f1, exit.f1)
        self.errors = self.overall.fp + self.overall.fn
        self.events = self.overall.tp + self.errors
        self.p0 = p0
        self.p_value = significance_test(self.errors, self.events, p0)

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}(enter={self.enter.f1_text}, "
            f"exit={self.exit.f1_text}, average={self.average_f1_text})"
        )

    @property
    def average_f1_text(self) -> str:
        """
        The average F1 score as a percentage string of up to 2 decimal places accuracy.\n
        The format is: ``"99.15%"``

        :type: str
        """
        return f"{round(self.average_f1 * 100, 2)}%"

    def to_dict(self) -> Dict[str, Any]:
        """
        The JSON-ready report.

        The top-level ``overall`` block holds the counts of both directions added together,
        with its F1 scored on those pooled sums. The ``accuracy`` block holds the F1 scores
        as percentages, and its ``overall`` entry is `average_f1`, the mean of the two
        per-direction scores. The two overall figures usually differ slightly.
        """
        return {
            "enter": self.enter.to_dict(),
            "exit": self.exit.to_dict(),
            "overall": self.overall.to_dict(),
            "average_f1": self.average_f1,
            "significance": {
                "errors": self.errors,
                "events": self.events,
                "p0": self.p0,
                "p_value": self.p_value,
            },
            "accuracy": {
                "enter": round(self.enter.f1 * 100, 2),
                "exit": round(self.exit.f1 * 100, 2),
                "overall": round(self.average_f1 * 100, 2),
            },
        }

    def table(self) -> str:
        """
        Renders a small percentage table for terminal output.
        """
        rows = [
            ("Activity", "TP", "FP", "FN", "Precision", "Recall", "F1"),
        ]
        for name, c in (("Entering", self.enter), ("Exiting", self.exit)):
            rows.append((
                name,
                str(c.tp),
                str(c.fp),
                str(c.fn),
                f"{c.precision * 100:.2f}%",
                f"{c.recall * 100:.2f}%",
                f"{c.f1 * 100:.2f}%",
            ))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows]
        lines.append(f"Overall counting average: {self.average_f1 * 100:.2f}%")
        return "\n".join(lines)


def render_report(
    counts: Dict[Direction, ConfusionCounts], p0: float = DEFAULT_P0
) -> MetricsReport:
    """
    Builds the full report out of per-direction confusion counts.

    Parameters
    ----------
    counts : Dict[Direction, ConfusionCounts]
        The counts, as returned by `match_events`. Missing directions count as empty.
    p0 : float
        The significance test null hypothesis error probability.\n
        Defaults to ``0.05``.
    """
    return MetricsReport(
        counts.get(Direction.Enter, ConfusionCounts()),
        counts.get(Direction.Exit, ConfusionCounts()),
        p0,
    )


def write_report(report: MetricsReport, path: Union[str, Path]):
    with open(path, "w") as file:
        json.dump(report.to_dict(), file, indent=2)
        file.write("\n")


def read_truth_csv(path: Union[str, Path]) -> List[GroundTruthEvent]:
    """
    Reads a ground truth file, with the ``frame,direction`` header.

    Raises
    ------
    FormatError
        The header is wrong, a row couldn't be parsed, or the rows aren't sorted by frame.
    """
    source = str(path)
    events: List[GroundTruthEvent] = []
    with open(path, newline='') as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRUTH_CSV_HEADER:
            raise FormatError(source, f"expected header {','.join(TRUTH_CSV_HEADER)}", line=1)
        for row in reader:
            if not row:
                continue
            try:
                frame_text, direction_text = row
                direction = Direction(direction_text)
                if direction is None:
                    raise ValueError(f"unknown direction {direction_text!r}")
                frame = int(frame_text)
                if events and frame < events[-1].frame_index:
                    raise ValueError("rows have to be sorted by frame")
                events.append(GroundTruthEvent(frame, direction))
            except ValueError as exc:
                raise FormatError(source, str(exc), line=reader.line_num) from exc
    return events


def write_truth_csv(events: Iterable[GroundTruthEvent], path: Union[str, Path]):
    with open(path, "w", newline='') as file:
        writer = csv.writer(file)
        writer.writerow(TRUTH_CSV_HEADER)
        for e in events:
            writer.writerow((e.frame_index, e.direction.slug))
