"""Minimal reader/writer for 8-bit binary PGM (P5) rasters."""

from pathlib import Path

import numpy as np

from .errors import IoFailure


def _tokens(data: bytes):
    """Yield (token, end_offset) for header fields, skipping ``#`` comments."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            yield data[i:j], j
            i = j


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode P5 bytes into a ``(height, width)`` uint8 array."""
    header = []
    end = 0
    for tok, end in _tokens(data):
        header.append(tok)
        if len(header) == 4:
            break
    if len(header) < 4 or header[0] != b"P5":
        raise ValueError("not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in header[1:])
    except ValueError:
        raise ValueError("malformed PGM header") from None
    if width < 1 or height < 1:
        raise ValueError(f"invalid PGM size {width}x{height}")
    if maxval != 255:
        raise ValueError(f"only 8-bit PGM supported (maxval {maxval})")
    # exactly one whitespace byte separates the header from the raster
    start = end + 1
    raster = data[start : start + width * height]
    if len(raster) != width * height:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 array")
    height, width = pixels.shape
    return b"P5\n%d %d\n255\n" % (width, height) + pixels.tobytes()


def read_pgm(path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_pgm(data)


def write_pgm(path, pixels: np.ndarray) -> None:
    try:
        Path(path).write_bytes(encode_pgm(pixels))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
