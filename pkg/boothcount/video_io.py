from __future__ import annotations

import logging
from pathlib import Path
from abc import abstractmethod
from typing import Any, Optional, Union, List, Dict, Tuple, Iterator, BinaryIO, TYPE_CHECKING

import numpy as np

from .mixins import ShapeMixin
from .exceptions import ParameterError, FormatError, TruncatedStream, DimensionMismatch

if TYPE_CHECKING:
    from .mog2 import MaskFrame


__all__ = [
    "MIN_SIZE",
    "Frame",
    "FrameStream",
    "PnmSequenceStream",
    "Y4mStream",
    "read_pgm",
    "open_pgm_sequence",
    "open_y4m",
    "write_pgm",
    "write_ppm",
]
logger = logging.getLogger(__package__)
MIN_SIZE = 16
PathLike = Union[str, Path]
# "C" tag values describing 4:2:0 subsampling, None stands for the tag being absent
Y4M_CHROMA_420 = (None, "420", "420jpeg", "420paldv", "420mpeg2")
_WHITESPACE = b" \t\r\n\v\f"


class Frame(ShapeMixin):
    """
    Represents a single decoded video frame.

    Parameters
    ----------
    pixels : numpy.ndarray
        ``uint8`` samples, shaped ``(height, width)`` for grayscale frames,
        or ``(height, width, 3)`` for interleaved RGB frames.
    index : int
        The ordinal frame number, starting at ``0``.

    Attributes
    ----------
    pixels : numpy.ndarray
        The frame samples.
    index : int
        The ordinal frame number.

    Raises
    ------
    ParameterError
        The array isn't ``uint8``, has an unsupported shape or is smaller than
        ``16x16`` pixels.
    """
    def __init__(self, pixels: np.ndarray, index: int = 0):
        if pixels.dtype != np.uint8:
            raise ParameterError("pixels", pixels.dtype, "samples have to be 8-bit")
        if pixels.ndim == 2:
            channels = 1
        elif pixels.ndim == 3 and pixels.shape[2] in (1, 3):
            channels = pixels.shape[2]
            if channels == 1:
                pixels = pixels[:, :, 0]
        else:
            raise ParameterError("pixels", pixels.shape, "expected (H, W) or (H, W, 3)")
        height, width = pixels.shape[:2]
        if width < MIN_SIZE or height < MIN_SIZE:
            raise ParameterError(
                "pixels", (width, height), f"frames have to be at least {MIN_SIZE}x{MIN_SIZE}"
            )
        super().__init__(width=width, height=height, channels=channels)
        self.pixels: np.ndarray = pixels
        self.index: int = index

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.index}: {self.width}x{self.height}x{self.channels})"

    def luma(self) -> Frame:
        """
        Converts the frame into a grayscale one. Grayscale frames are returned unchanged.

        Uses the BT.601 weights, rounded half-to-even.

        Returns
        -------
        Frame
            The grayscale frame, with the same index.
        """
        if self.channels == 1:
            return self
        rgb = self.pixels.astype(np.float64)
        y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
        return Frame(np.clip(np.rint(y), 0, 255).astype(np.uint8), self.index)


class FrameStream(ShapeMixin):
    """
    Base class of all frame sources. Streams are sequential, single-consumer objects:
    iterating a stream delivers every frame exactly once, in order, with consecutive indices.

    Streams can be used as context managers, which closes them on exit.

    Attributes
    ----------
    source : str
        The source descriptor (file path or directory pattern).
    frames_delivered : int
        The amount of frames delivered so far.
    """
    def __init__(self, source: str, *, width: int, height: int, channels: int):
        super().__init__(width=width, height=height, channels=channels)
        self.source: str = source
        self.frames_delivered: int = 0

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.source!r}, "
            f"{self.width}x{self.height}x{self.channels}, delivered={self.frames_delivered})"
        )

    def __enter__(self) -> FrameStream:
        return self

    def __exit__(self, exc_type, exc, traceback):
        self.close()

    def __iter__(self) -> Iterator[Frame]:
        while (frame := self.read()) is not None:
            yield frame

    def read(self) -> Optional[Frame]:
        """
        Reads the next frame.

        Returns
        -------
        Optional[Frame]
            The next frame, or `None` once the stream is exhausted.

        Raises
        ------
        DimensionMismatch
            The decoded frame doesn't match the stream's declared dimensions.
        """
        pixels = self._next_pixels(self.frames_delivered)
        if pixels is None:
            return None
        frame = Frame(pixels, self.frames_delivered)
        self._check_shape(frame, f"{self.source}, frame {frame.index}")
        self.frames_delivered += 1
        return frame

    def close(self):
        """
        Releases any resources held by the stream. Does nothing by default.
        """
        pass

    @abstractmethod
    def _next_pixels(self, index: int) -> Optional[np.ndarray]:
        raise NotImplementedError


def _parse_pnm(data: bytes, source: str) -> Tuple[np.ndarray, int]:
    """
    Decodes a binary PGM (``P5``) or PPM (``P6``) image.

    Returns the pixel array and the amount of bytes consumed.
    """
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(source, f"unsupported magic number {magic!r}")
    fields: List[int] = []
    pos = 2
    while len(fields) < 3:
        # skip whitespace and comments between header fields
        while pos < len(data) and (data[pos] in _WHITESPACE or data[pos] == ord('#')):
            if data[pos] == ord('#'):
                end = data.find(b"\n", pos)
                pos = len(data) if end == -1 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError(source, "header is missing a numeric field")
        fields.append(int(data[start:pos]))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(source, f"maxval has to be 255, got {maxval}")
    # exactly one whitespace byte separates maxval from the payload
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError(source, "maxval isn't followed by whitespace")
    pos += 1
    size = width * height * channels
    if width < 1 or height < 1:
        raise FormatError(source, f"invalid size {width}x{height}")
    if len(data) - pos < size:
        raise FormatError(source, f"payload has {len(data) - pos} bytes, expected {size}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    if channels == 1:
        pixels = pixels.reshape(height, width)
    else:
        pixels = pixels.reshape(height, width, channels)
    return pixels.copy(), pos + size


def _check_min_size(width: int, height: int, source: str):
    if width < MIN_SIZE or height < MIN_SIZE:
        raise FormatError(
            source, f"frames are {width}x{height}, the minimum is {MIN_SIZE}x{MIN_SIZE}"
        )


def read_pgm(path: PathLike) -> np.ndarray:
    """
    Reads a single binary PGM or PPM file.

    Parameters
    ----------
    path : Union[str, pathlib.Path]
        The file to read.

    Returns
    -------
    numpy.ndarray
        ``uint8`` samples, shaped ``(height, width)`` for PGM and ``(height, width, 3)``
        for PPM files.

    Raises
    ------
    FormatError
        The header is malformed, maxval isn't 255 or the payload is too short.
    """
    data = Path(path).read_bytes()
    pixels, _ = _parse_pnm(data, str(path))
    return pixels


class PnmSequenceStream(FrameStream):
    """
    A stream over a lexicographically ordered list of PGM or PPM files.

    Inherits from `FrameStream`.
    """
    def __init__(self, files: List[Path], source: str):
        first = read_pgm(files[0])
        _check_min_size(first.shape[1], first.shape[0], str(files[0]))
        channels = 1 if first.ndim == 2 else first.shape[2]
        super().__init__(source, width=first.shape[1], height=first.shape[0], channels=channels)
        self.files: List[Path] = files
        self._first: Optional[np.ndarray] = first

    def __len__(self) -> int:
        return len(self.files)

    def _next_pixels(self, index: int) -> Optional[np.ndarray]:
        if index >= len(self.files):
            return None
        if index == 0 and self._first is not None:
            pixels, self._first = self._first, None
            return pixels
        pixels = read_pgm(self.files[index])
        channels = 1 if pixels.ndim == 2 else pixels.shape[2]
        got = (pixels.shape[1], pixels.shape[0], channels)
        if got != self.shape:
            raise DimensionMismatch(self.shape, got, str(self.files[index]))
        return pixels


def open_pgm_sequence(directory_path: PathLike, pattern: str = "*.pgm") -> PnmSequenceStream:
    """
    Opens a directory of binary PGM (or PPM) files as a frame stream.

    Time is defined by the lexicographic order of the file names, so they have to be
    zero-padded (``000.pgm``, ``001.pgm``, ...).

    Parameters
    ----------
    directory_path : Union[str, pathlib.Path]
        The directory holding the frames.
    pattern : str
        The file name glob.\n
        Defaults to ``*.pgm``.

    Returns
    -------
    PnmSequenceStream
        The opened stream.

    Raises
    ------
    FileNotFoundError
        The directory doesn't exist, or no files match the pattern.
    FormatError
        The first file's header is malformed, or its frames are smaller than ``16x16``.
    """
    directory = Path(directory_path)
    if not directory.is_dir():
        raise FileNotFoundError(f"Frame directory doesn't exist: {directory}")
    files = sorted((p for p in directory.glob(pattern) if p.is_file()), key=lambda p: p.name)
    if not files:
        raise FileNotFoundError(f"No files matching {pattern!r} in {directory}")
    stream = PnmSequenceStream(files, str(directory / pattern))
    logger.info(
        f"video_io.open_pgm_sequence({directory}, {pattern!r}) -> "
        f"{len(files)} files, {stream.width}x{stream.height}x{stream.channels}"
    )
    return stream


class Y4mStream(FrameStream):
    """
    A stream over the luma planes of a YUV4MPEG2 file with 4:2:0 chroma.
    Chroma planes are skipped.

    Inherits from `FrameStream`.

    Attributes
    ----------
    frame_rate : Optional[Tuple[int, int]]
        The ``F`` tag as a ``(numerator, denominator)`` pair, if present.
    tags : Dict[str, str]
        All raw header tags, keyed by their letter.
    bytes_consumed : int
        The amount of bytes consumed from the file so far.
    """
    def __init__(self, path: Path):
        self._file: BinaryIO = open(path, "rb")
        try:
            header = self._file.readline(4096)
            width, height, tags = self._parse_header(header, str(path))
        except BaseException:
            self._file.close()
            raise
        super().__init__(str(path), width=width, height=height, channels=1)
        self.tags: Dict[str, str] = tags
        self.frame_rate: Optional[Tuple[int, int]] = None
        if "F" in tags:
            num, _, den = tags["F"].partition(':')
            if num.isdigit() and den.isdigit():
                self.frame_rate = (int(num), int(den))
        if tags.get("I", 'p') not in ('p', '?'):
            logger.warning(f"{path}: interlaced content ({tags['I']}), reading luma as-is")
        self.bytes_consumed: int = len(header)
        self._luma_size = width * height
        self._chroma_size = 2 * ((width + 1) // 2) * ((height + 1) // 2)

    @staticmethod
    def _parse_header(header: bytes, source: str) -> Tuple[int, int, Dict[str, str]]:
        if not header.endswith(b"\n"):
            raise FormatError(source, "header line is not terminated")
        tokens = header.rstrip(b"\n").split(b" ")
        if tokens[0] != b"YUV4MPEG2":
            raise FormatError(source, "missing YUV4MPEG2 signature")
        tags: Dict[str, str] = {}
        for token in tokens[1:]:
            if token:
                text = token.decode("ascii", errors="replace")
                tags[text[0]] = text[1:]
        try:
            width, height = int(tags["W"]), int(tags["H"])
        except (KeyError, ValueError):
            raise FormatError(source, "W and H tags are required")
        _check_min_size(width, height, source)
        chroma = tags.get("C")
        if chroma not in Y4M_CHROMA_420:
            raise FormatError(source, f"unsupported chroma subsampling C{chroma}")
        return width, height, tags

    def _next_pixels(self, index: int) -> Optional[np.ndarray]:
        marker = self._file.readline(1024)
        if not marker:
            return None
        if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
            if not marker.endswith(b"\n") and b"FRAME".startswith(marker.rstrip()):
                raise TruncatedStream(self.source, index)
            raise FormatError(self.source, f"frame {index} has no FRAME marker")
        luma = self._file.read(self._luma_size)
        chroma = self._file.read(self._chroma_size)
        if len(luma) != self._luma_size or len(chroma) != self._chroma_size:
            raise TruncatedStream(self.source, index)
        self.bytes_consumed += len(marker) + len(luma) + len(chroma)
        return np.frombuffer(luma, dtype=np.uint8).reshape(self.height, self.width).copy()

    def close(self):
        self._file.close()


def open_y4m(path: PathLike) -> Y4mStream:
    """
    Opens a YUV4MPEG2 file as a grayscale frame stream, built from the luma plane.

    Parameters
    ----------
    path : Union[str, pathlib.Path]
        The file to open.

    Returns
    -------
    Y4mStream
        The opened stream. Close it once done, or use it as a context manager.

    Raises
    ------
    FormatError
        The signature is wrong, or the chroma subsampling isn't 4:2:0.
    """
    stream = Y4mStream(Path(path))
    logger.info(f"video_io.open_y4m({path}) -> {stream.width}x{stream.height}, tags={stream.tags}")
    return stream


def _image_array(image: Union[Frame, MaskFrame, np.ndarray]) -> np.ndarray:
    array: Any = getattr(image, "pixels", None)
    if array is None:
        array = getattr(image, "labels", image)
    return np.asarray(array)


def write_pgm(image: Union[Frame, MaskFrame, np.ndarray], path: PathLike):
    """
    Writes a single-channel image as a binary PGM file (``P5``, maxval 255).

    Parameters
    ----------
    image : Union[Frame, MaskFrame, numpy.ndarray]
        The image to write. Arrays have to be ``uint8`` and two dimensional.
    path : Union[str, pathlib.Path]
        The destination file.

    Raises
    ------
    ParameterError
        The image doesn't have exactly one channel.
    OSError
        The file couldn't be written.
    """
    array = _image_array(image)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    if array.ndim != 2:
        channels = array.shape[2] if array.ndim == 3 else array.ndim
        raise ParameterError("channels", channels, "PGM images have exactly one channel")
    if array.dtype != np.uint8:
        raise ParameterError("dtype", array.dtype, "samples have to be 8-bit")
    height, width = array.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(array).tobytes())


def write_ppm(image: Union[Frame, np.ndarray], path: PathLike):
    """
    Writes a 3-channel image as a binary PPM file (``P6``, maxval 255).

    Parameters
    ----------
    image : Union[Frame, numpy.ndarray]
        The image to write. Arrays have to be ``uint8``, shaped ``(height, width, 3)``.
    path : Union[str, pathlib.Path]
        The destination file.

    Raises
    ------
    ParameterError
        The image doesn't have exactly three channels.
    """
    array = _image_array(image)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ParameterError("channels", array.shape, "PPM images have exactly three channels")
    if array.dtype != np.uint8:
        raise ParameterError("dtype", array.dtype, "samples have to be 8-bit")
    height, width = array.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(array).tobytes())
