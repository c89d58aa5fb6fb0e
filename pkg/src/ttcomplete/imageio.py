"""Minimal binary PGM (P5) / PPM (P6) reader and writer, plus tensor file dispatch."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgument, MalformedInput
from .tensor import read_dt1, write_dt1

__all__ = ["load_image", "save_image", "load_tensor", "save_tensor", "input_kind"]

_WHITESPACE = b" \t\r\n"


def _header_tokens(raw: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the first raster byte.
    """
    tokens = []
    pos = 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos] in _WHITESPACE:
            pos += 1
        if pos >= len(raw):
            raise MalformedInput("truncated PNM header")
        if raw[pos:pos + 1] == b"#":
            end = raw.find(b"\n", pos)
            if end < 0:
                raise MalformedInput("truncated PNM header")
            pos = end + 1
            continue
        start = pos
        while pos < len(raw) and raw[pos] not in _WHITESPACE:
            pos += 1
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(raw) or raw[pos] not in _WHITESPACE:
        raise MalformedInput("missing separator after PNM header")
    return tokens, pos + 1


def load_image(path) -> np.ndarray:
    """Read a binary PGM/PPM with maxval 255, scaled to [0, 1].

    P5 gives a ``(rows, cols)`` tensor, P6 a ``(rows, cols, 3)`` tensor.
    """
    raw = Path(path).read_bytes()
    tokens, offset = _header_tokens(raw, 4)
    magic = tokens[0]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise MalformedInput(f"unsupported PNM magic {magic!r}; need P5 or P6")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedInput("non-integer PNM header field") from None
    if width < 1 or height < 1:
        raise MalformedInput(f"bad image size {width}x{height}")
    if maxval != 255:
        raise MalformedInput(f"only maxval 255 is supported, got {maxval}")
    count = width * height * channels
    body = raw[offset:offset + count]
    if len(body) != count:
        raise MalformedInput(f"raster truncated: expected {count} bytes, found {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).astype(np.float64) / 255.0
    if channels == 1:
        return np.asfortranarray(pixels.reshape(height, width))
    return np.asfortranarray(pixels.reshape(height, width, 3))


def save_image(t, path) -> None:
    """Write an order-2 tensor as P5 or a ``(rows, cols, 3)`` tensor as P6."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2:
        magic = b"P5"
    elif t.ndim == 3 and t.shape[2] == 3:
        magic = b"P6"
    else:
        raise InvalidArgument(f"cannot store dims {t.shape} as PGM/PPM")
    pixels = np.rint(np.clip(t, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{t.shape[1]} {t.shape[0]}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def input_kind(path, kind=None) -> str:
    if kind:
        return kind
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("pgm", "ppm", "dt1"):
        return suffix
    raise InvalidArgument(f"cannot infer input kind of {path}; pass pgm, ppm or dt1")


def load_tensor(path, kind=None) -> np.ndarray:
    kind = input_kind(path, kind)
    if kind in ("pgm", "ppm"):
        return load_image(path)
    return read_dt1(path)


def save_tensor(t, path) -> None:
    if Path(path).suffix.lower() in (".pgm", ".ppm"):
        save_image(t, path)
    else:
        write_dt1(t, path)
