from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

import boothcount
from boothcount import (
    Frame,
    FormatError,
    ParameterError,
    TruncatedStream,
    DimensionMismatch,
    read_pgm,
    write_pgm,
    write_ppm,
    open_y4m,
    open_pgm_sequence,
)

from .conftest import random_frames


pytestmark = [pytest.mark.video_io, pytest.mark.base()]


def _y4m_bytes(width: int, height: int, frames: int, header_extra: bytes = b" F30:1 Ip") -> bytes:
    chroma = 2 * ((width + 1) // 2) * ((height + 1) // 2)
    data = b"YUV4MPEG2 W%d H%d" % (width, height) + header_extra + b"\n"
    for i in range(frames):
        data += b"FRAME\n" + bytes([i]) * (width * height) + bytes([128]) * chroma
    return data


def test_frame():
    pixels = np.zeros((16, 20), dtype=np.uint8)
    frame = Frame(pixels, 3)
    # shape access
    assert frame.shape == (20, 16, 1)
    assert frame.area == 320
    assert frame.index == 3
    assert repr(frame) == "Frame(3: 20x16x1)"
    # single-channel trailing axis gets squeezed
    assert Frame(np.zeros((16, 16, 1), dtype=np.uint8)).pixels.ndim == 2
    # rejected inputs
    with pytest.raises(ParameterError):
        Frame(np.zeros((16, 16), dtype=np.uint16))
    with pytest.raises(ParameterError):
        Frame(np.zeros((15, 16), dtype=np.uint8))
    with pytest.raises(ParameterError):
        Frame(np.zeros((16, 16, 2), dtype=np.uint8))


def test_frame_luma():
    rgb = np.zeros((16, 16, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    frame = Frame(rgb, 5)
    luma = frame.luma()
    assert luma.channels == 1
    assert luma.index == 5
    # 0.299 * 255 = 76.245
    assert (luma.pixels == 76).all()
    # grayscale frames pass through
    assert luma.luma() is luma


def test_pgm_roundtrip(tmp_path: Path):
    frame = random_frames(0, 1)[0]
    path = tmp_path / "frame.pgm"
    write_pgm(frame, path)
    assert path.read_bytes().startswith(b"P5\n32 24\n255\n")
    assert np.array_equal(read_pgm(path), frame.pixels)
    # raw arrays are accepted too, even below the frame size minimum
    tiny = np.array([[0, 255], [127, 0]], dtype=np.uint8)
    write_pgm(tiny, path)
    assert path.read_bytes() == b"P5\n2 2\n255\n\x00\xff\x7f\x00"
    assert np.array_equal(read_pgm(path), tiny)


def test_ppm_roundtrip(tmp_path: Path):
    frame = random_frames(1, 1, channels=3)[0]
    path = tmp_path / "frame.ppm"
    write_ppm(frame, path)
    assert np.array_equal(read_pgm(path), frame.pixels)
    # channel count checks
    with pytest.raises(ParameterError):
        write_ppm(np.zeros((4, 4), dtype=np.uint8), path)
    with pytest.raises(ParameterError):
        write_pgm(frame, path)


def test_pgm_header(tmp_path: Path):
    path = tmp_path / "frame.pgm"
    # comments and arbitrary whitespace between header fields
    path.write_bytes(b"P5 # a comment\n2\t\n# another\n 1 255\n\x01\x02")
    assert read_pgm(path).tolist() == [[1, 2]]
    # wrong magic
    path.write_bytes(b"P2\n2 1\n255\n\x01\x02")
    with pytest.raises(FormatError, match="magic"):
        read_pgm(path)
    # 16-bit maxval
    path.write_bytes(b"P5\n2 1\n65535\n\x00\x01\x00\x02")
    with pytest.raises(FormatError, match="maxval"):
        read_pgm(path)
    # short payload
    path.write_bytes(b"P5\n2 2\n255\n\x01\x02")
    with pytest.raises(FormatError, match="payload"):
        read_pgm(path)
    # missing field
    path.write_bytes(b"P5\n2\n")
    with pytest.raises(FormatError):
        read_pgm(path)


def test_pgm_sequence(tmp_path: Path):
    frames = random_frames(2, 3)
    # written out of order, read back in name order
    for i in (2, 0, 1):
        write_pgm(frames[i], tmp_path / f"{i:03}.pgm")
    (tmp_path / "notes.txt").write_text("not a frame")
    with open_pgm_sequence(tmp_path) as stream:
        assert len(stream) == 3
        assert stream.shape == (32, 24, 1)
        read = list(stream)
    assert [f.index for f in read] == [0, 1, 2]
    for original, decoded in zip(frames, read):
        assert np.array_equal(original.pixels, decoded.pixels)
    # exhausted streams keep returning None
    assert stream.read() is None
    assert stream.frames_delivered == 3


def test_pgm_sequence_errors(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        open_pgm_sequence(tmp_path / "missing")
    with pytest.raises(FileNotFoundError):
        open_pgm_sequence(tmp_path)
    write_pgm(np.zeros((16, 16), dtype=np.uint8), tmp_path / "000.pgm")
    write_pgm(np.zeros((16, 20), dtype=np.uint8), tmp_path / "001.pgm")
    stream = open_pgm_sequence(tmp_path)
    assert stream.read() is not None
    with pytest.raises(DimensionMismatch) as exc_info:
        stream.read()
    assert exc_info.value.expected == (16, 16, 1)
    assert exc_info.value.got == (20, 16, 1)
    # frames below the minimum size are an input error, not a parameter one
    small = tmp_path / "small"
    small.mkdir()
    write_pgm(np.zeros((8, 20), dtype=np.uint8), small / "000.pgm")
    with pytest.raises(FormatError, match="minimum"):
        open_pgm_sequence(small)


def test_y4m(tmp_path: Path):
    path = tmp_path / "clip.y4m"
    path.write_bytes(_y4m_bytes(17, 16, 3))
    with open_y4m(path) as stream:
        assert stream.shape == (17, 16, 1)
        assert stream.frame_rate == (30, 1)
        assert stream.tags["I"] == "p"
        frames = list(stream)
    # chroma is skipped, odd widths round the chroma planes up
    assert [f.index for f in frames] == [0, 1, 2]
    assert [int(f.pixels[0, 0]) for f in frames] == [0, 1, 2]
    assert all((f.pixels == f.index).all() for f in frames)
    assert stream.bytes_consumed == path.stat().st_size


def test_y4m_errors(tmp_path: Path):
    path = tmp_path / "clip.y4m"
    # signature
    path.write_bytes(b"YUV4MPEG W16 H16\n")
    with pytest.raises(FormatError, match="signature"):
        open_y4m(path)
    # size tags
    path.write_bytes(b"YUV4MPEG2 W16\n")
    with pytest.raises(FormatError):
        open_y4m(path)
    # too small
    path.write_bytes(_y4m_bytes(8, 8, 1))
    with pytest.raises(FormatError, match="minimum"):
        open_y4m(path)
    # chroma subsampling
    path.write_bytes(_y4m_bytes(16, 16, 1, b" C422"))
    with pytest.raises(FormatError, match="C422"):
        open_y4m(path)
    # explicit 4:2:0 is fine
    path.write_bytes(_y4m_bytes(16, 16, 1, b" C420jpeg"))
    with open_y4m(path) as stream:
        assert len(list(stream)) == 1
    # truncated payload
    path.write_bytes(_y4m_bytes(16, 16, 2)[:-10])
    with open_y4m(path) as stream:
        assert stream.read() is not None
        with pytest.raises(TruncatedStream) as exc_info:
            stream.read()
    assert exc_info.value.frame_index == 1
    # truncated streams are format errors as well
    assert isinstance(exc_info.value, FormatError)
    # garbage instead of a frame marker
    path.write_bytes(_y4m_bytes(16, 16, 1) + b"JUNK\n")
    with open_y4m(path) as stream:
        stream.read()
        with pytest.raises(FormatError, match="FRAME"):
            stream.read()


def test_exports():
    # the stream types are reachable from the package root
    assert boothcount.FrameStream in boothcount.PnmSequenceStream.__mro__
    assert boothcount.MIN_SIZE == 16
