"""Binary PGM (P5) / PPM (P6) reading and writing.

Samples are mapped to [0, 1] by dividing by maxval; 16-bit samples are
big-endian. Header comments are accepted on read and never written.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ChannelMismatchError, InvalidConfigError, ParseError

__all__ = ["ImageBuffer", "load", "save", "read_image", "write_image", "encode", "decode"]

_MAGIC = {b"P5": 1, b"P6": 3}


@dataclass
class ImageBuffer:
    data: np.ndarray  # H x W or H x W x 3, floats in [0, 1]
    path: str | None = None
    bit_depth: int | None = None

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


class _Header:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def _skip(self):
        raw = self.raw
        while self.pos < len(raw):
            ch = raw[self.pos:self.pos + 1]
            if ch == b"#":
                end = raw.find(b"\n", self.pos)
                self.pos = len(raw) if end < 0 else end + 1
            elif ch.isspace():
                self.pos += 1
            else:
                break

    def token(self) -> tuple[bytes, int]:
        self._skip()
        start = self.pos
        while self.pos < len(self.raw) and not self.raw[self.pos:self.pos + 1].isspace() \
                and self.raw[self.pos:self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise ParseError("unexpected end of header", start)
        return self.raw[start:self.pos], start

    def integer(self, what: str) -> int:
        tok, at = self.token()
        if not tok.isdigit():
            raise ParseError(f"invalid {what} {tok!r}", at)
        return int(tok)


def decode(raw: bytes) -> tuple[np.ndarray, int]:
    """Parse a P5/P6 byte string into ``(samples in [0, 1], bit_depth)``."""
    if len(raw) < 2 or raw[:2] not in _MAGIC:
        raise ParseError(f"unsupported magic {raw[:2]!r}", 0)
    channels = _MAGIC[raw[:2]]
    hdr = _Header(raw)
    hdr.pos = 2
    width = hdr.integer("width")
    height = hdr.integer("height")
    maxval_at = hdr.pos
    maxval = hdr.integer("maxval")
    if width < 1 or height < 1:
        raise ParseError("image dimensions must be positive", maxval_at)
    if not (1 <= maxval <= 65535):
        raise ParseError(f"maxval {maxval} out of range", maxval_at)
    if hdr.pos >= len(raw) or not raw[hdr.pos:hdr.pos + 1].isspace():
        raise ParseError("missing whitespace after maxval", hdr.pos)
    start = hdr.pos + 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height * channels
    need = n * dtype.itemsize
    if len(raw) - start < need:
        raise ParseError(f"truncated payload: expected {need} bytes, found {len(raw) - start}", len(raw))
    samples = np.frombuffer(raw, dtype=dtype, count=n, offset=start).astype(float)
    shape = (height, width) if channels == 1 else (height, width, channels)
    data = np.clip(samples.reshape(shape) / maxval, 0.0, 1.0)
    return data, 16 if maxval > 255 else 8


def encode(data: np.ndarray, bit_depth: int = 8) -> bytes:
    if bit_depth not in (8, 16):
        raise InvalidConfigError(f"bit depth must be 8 or 16, got {bit_depth}")
    data = np.asarray(data, dtype=float)
    if data.ndim == 2:
        magic = b"P5"
    elif data.ndim == 3 and data.shape[2] == 3:
        magic = b"P6"
    else:
        raise ChannelMismatchError(f"cannot encode array of shape {data.shape} as PGM/PPM")
    maxval = 255 if bit_depth == 8 else 65535
    # round half up
    q = np.floor(np.clip(data, 0.0, 1.0) * maxval + 0.5)
    dtype = np.dtype("u1") if bit_depth == 8 else np.dtype(">u2")
    header = b"%s\n%d %d\n%d\n" % (magic, data.shape[1], data.shape[0], maxval)
    return header + q.astype(dtype).tobytes()


def load(path, channels: int | None = None) -> ImageBuffer:
    """Read a PGM/PPM file; `channels` (1 or 3), when given, must match the file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    data, depth = decode(raw)
    have = 1 if data.ndim == 2 else 3
    if channels is not None and channels != have:
        raise ChannelMismatchError(f"{os.fspath(path)} has {have} channel(s), {channels} requested")
    return ImageBuffer(data, os.fspath(path), depth)


def save(path, image, bit_depth: int = 8) -> None:
    data = image.data if isinstance(image, ImageBuffer) else image
    payload = encode(data, bit_depth)
    with open(path, "wb") as fh:
        fh.write(payload)


def read_image(path, channels: int | None = None) -> np.ndarray:
    return load(path, channels).data


def write_image(path, data, bit_depth: int = 8) -> None:
    save(path, data, bit_depth)
