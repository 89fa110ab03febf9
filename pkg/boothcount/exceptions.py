from __future__ import annotations

from typing import Any, Optional, Sequence, Tuple


__all__ = [
    "BoothCountException",
    "ParameterError",
    "ConfigError",
    "FormatError",
    "TruncatedStream",
    "DimensionMismatch",
    "FrameOrderError",
    "EmptyModel",
    "UnknownPreset",
    "InvariantError",
]


class BoothCountException(Exception):
    """
    The base exception type for this entire package.
    """
    pass


class ParameterError(BoothCountException):
    """
    The exception raised when a parameter block (`Mog2Params`, `MorphParams`, `TrackerParams`,
    `CountingLine`, `SceneSpec`, ...) holds an invalid value.

    Inherits from `BoothCountException`.

    Attributes
    ----------
    field : str
        The name of the offending field.
    value : Any
        The offending value.
    reason : str
        A short description of the violated constraint.
    """
    def __init__(self, field: str, value: Any, reason: str):
        super().__init__(f"Invalid value for '{field}': {value!r} ({reason})")
        self.field = field
        self.value = value
        self.reason = reason


class ConfigError(BoothCountException):
    """
    The exception raised when the pipeline configuration fails validation.

    Inherits from `BoothCountException`.

    Attributes
    ----------
    field : str
        The dotted ``section.key`` name of the offending configuration entry,
        for example ``counter.line``.
    reason : str
        A short description of the problem.
    """
    def __init__(self, field: str, reason: str):
        super().__init__(f"Configuration error in '{field}': {reason}")
        self.field = field
        self.reason = reason


class FormatError(BoothCountException):
    """
    The exception raised when an input file (PGM, PPM, Y4M or CSV) can't be parsed.

    Inherits from `BoothCountException`.

    Attributes
    ----------
    source : str
        The file the problem was found in.
    reason : str
        A short description of the problem.
    line : Optional[int]
        The 1-based line number, for text formats. `None` otherwise.
    """
    def __init__(self, source: str, reason: str, *, line: Optional[int] = None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"Malformed input {where}: {reason}")
        self.source = source
        self.reason = reason
        self.line = line


class TruncatedStream(FormatError):
    """
    The exception raised when a frame payload ends before all of its bytes could be read.

    Inherits from `FormatError`.

    Attributes
    ----------
    frame_index : int
        The index of the frame that was cut short.
    """
    def __init__(self, source: str, frame_index: int):
        super().__init__(source, f"frame {frame_index} payload is truncated")
        self.frame_index = frame_index


class DimensionMismatch(BoothCountException):
    """
    The exception raised when a frame, mask or model doesn't have the expected shape.

    Inherits from `BoothCountException`.

    Attributes
    ----------
    expected : Tuple[int, ...]
        The expected ``(width, height, channels)`` triple.
    got : Tuple[int, ...]
        The triple that was found instead.
    """
    def __init__(self, expected: Tuple[int, ...], got: Tuple[int, ...], where: str = ''):
        text = f"Dimension mismatch: expected {expected}, got {got}"
        if where:
            text += f" ({where})"
        super().__init__(text)
        self.expected = expected
        self.got = got


class FrameOrderError(BoothCountException):
    """
    The exception raised when a stateful stage receives a frame index that isn't
    strictly greater than the previous one.

    Inherits from `BoothCountException`.
    """
    def __init__(self, previous: int, got: int):
        super().__init__(f"Frame index {got} does not follow frame index {previous}")
        self.previous = previous
        self.got = got


class EmptyModel(BoothCountException):
    """
    The exception raised when the background image is requested from a model
    that hasn't seen any frames yet.

    Inherits from `BoothCountException`.
    """
    def __init__(self):
        super().__init__("The background model hasn't been trained on any frames!")


class UnknownPreset(BoothCountException):
    """
    The exception raised when asking for a synthetic scene preset that doesn't exist.

    Inherits from `BoothCountException`.

    Attributes
    ----------
    name : str
        The requested preset name.
    valid : Sequence[str]
        The preset names that are available.
    """
    def __init__(self, name: str, valid: Sequence[str]):
        super().__init__(f"Unknown preset {name!r}, valid names are: {', '.join(valid)}")
        self.name = name
        self.valid = valid


class InvariantError(BoothCountException):
    """
    The exception raised when an internal invariant doesn't hold. Seeing this one means
    there's a bug in the package.

    Inherits from `BoothCountException`.
    """
    def __init__(self, reason: str):
        super().__init__(f"Internal invariant violated: {reason}")
        self.reason = reason
