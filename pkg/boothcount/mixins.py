from __future__ import annotations

from typing import Tuple

from .exceptions import DimensionMismatch


__all__ = [
    "ShapeMixin",
    "ConfusionMixin",
]


class ShapeMixin:
    """
    Represents anything with a raster size: frames, masks and background models.

    Attributes
    ----------
    width : int
        The width, in pixels.
    height : int
        The height, in pixels.
    channels : int
        The amount of samples per pixel. Masks always have ``1``.
    """
    def __init__(self, *, width: int, height: int, channels: int = 1):
        self.width: int = width
        self.height: int = height
        self.channels: int = channels

    @property
    def shape(self) -> Tuple[int, int, int]:
        """
        The ``(width, height, channels)`` triple.

        :type: Tuple[int, int, int]
        """
        return (self.width, self.height, self.channels)

    @property
    def area(self) -> int:
        """
        The amount of pixels. This is just ``width * height``.

        :type: int
        """
        return self.width * self.height

    def _check_shape(self, other: ShapeMixin, where: str = '', *, channels: bool = True):
        if channels:
            expected, got = self.shape, other.shape
        else:
            expected, got = self.shape[:2], other.shape[:2]
        if expected != got:
            raise DimensionMismatch(expected, got, where)


class ConfusionMixin:
    """
    Represents detection outcomes of a single event class. Contains the metric helpers.

    Empty denominators follow fixed conventions, so no metric ever divides by zero:
    no predictions means a precision of ``1``, no actual events means a recall of ``1``,
    and a zero precision and recall means an F1 of ``0``.

    Attributes
    ----------
    tp : int
        The amount of true positives.
    fp : int
        The amount of false positives.
    fn : int
        The amount of false negatives.
    """
    def __init__(self, *, tp: int, fp: int, fn: int):
        if min(tp, fp, fn) < 0:
            raise ValueError(f"Confusion counts can't be negative: {tp=}, {fp=}, {fn=}")
        self.tp: int = tp
        self.fp: int = fp
        self.fn: int = fn

    @property
    def predicted(self) -> int:
        """
        The amount of predicted events. This is just ``tp + fp``.

        :type: int
        """
        return self.tp + self.fp

    @property
    def actual(self) -> int:
        """
        The amount of ground truth events. This is just ``tp + fn``.

        :type: int
        """
        return self.tp + self.fn

    @property
    def precision(self) -> float:
        """
        ``tp / (tp + fp)``, or ``1.0`` when there were no predictions.

        :type: float
        """
        return self.tp / self.predicted if self.predicted > 0 else 1.0

    @property
    def recall(self) -> float:
        """
        ``tp / (tp + fn)``, or ``1.0`` when there were no actual events.

        :type: float
        """
        return self.tp / self.actual if self.actual > 0 else 1.0

    @property
    def f1(self) -> float:
        """
        The harmonic mean of `precision` and `recall`, or ``0.0`` when both are zero.

        :type: float
        """
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    @property
    def f1_text(self) -> str:
        """
        The F1 score as a percentage string of up to 2 decimal places accuracy.\n
        The format is: ``"98.31%"``

        :type: str
        """
        return f"{round(self.f1 * 100, 2)}%"
