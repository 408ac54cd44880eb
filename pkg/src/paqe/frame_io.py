"""Raw 10-bit 4:2:0 planar video I/O.

Each sample is stored as a little-endian 16-bit word whose upper six bits
must be zero. A frame is the Y plane followed by the U and V planes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError, MalformedInputError, SampleRangeError

BIT_DEPTH = 10
MAX_SAMPLE = (1 << BIT_DEPTH) - 1
_WORD = np.dtype("<u2")


def check_plane(plane: np.ndarray, name: str = "plane") -> np.ndarray:
    if plane.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {plane.shape}")
    if plane.size and (plane.min() < 0 or plane.max() > MAX_SAMPLE):
        raise SampleRangeError(f"{name} has samples outside [0, {MAX_SAMPLE}]")
    return plane


@dataclass
class Frame420:
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    poc: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y)
        self.u = np.asarray(self.u)
        self.v = np.asarray(self.v)
        for name in ("y", "u", "v"):
            check_plane(getattr(self, name), name)
        h, w = self.y.shape
        if h % 2 or w % 2:
            raise ContractError(f"luma dimensions must be even, got {w}x{h}")
        for name in ("u", "v"):
            if getattr(self, name).shape != (h // 2, w // 2):
                raise ContractError(
                    f"{name} plane must be {w // 2}x{h // 2}, got "
                    f"{getattr(self, name).shape[1]}x{getattr(self, name).shape[0]}"
                )
        self.y = self.y.astype(np.uint16, copy=False)
        self.u = self.u.astype(np.uint16, copy=False)
        self.v = self.v.astype(np.uint16, copy=False)

    @property
    def width(self) -> int:
        return self.y.shape[1]

    @property
    def height(self) -> int:
        return self.y.shape[0]

    @property
    def planes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.y, self.u, self.v

    def plane(self, plane_id: str) -> np.ndarray:
        return {"Y": self.y, "U": self.u, "V": self.v}[plane_id.upper()]

    def copy(self, poc: int | None = None) -> "Frame420":
        return Frame420(self.y.copy(), self.u.copy(), self.v.copy(),
                        self.poc if poc is None else poc)

    def with_planes(self, y, u, v) -> "Frame420":
        return Frame420(y, u, v, self.poc)

    def __eq__(self, other):
        if not isinstance(other, Frame420):
            return NotImplemented
        return (self.poc == other.poc and np.array_equal(self.y, other.y)
                and np.array_equal(self.u, other.u) and np.array_equal(self.v, other.v))


def blank_frame(width: int, height: int, value: int = 512, poc: int = 0) -> Frame420:
    return Frame420(
        np.full((height, width), value, np.uint16),
        np.full((height // 2, width // 2), value, np.uint16),
        np.full((height // 2, width // 2), value, np.uint16),
        poc,
    )


def frame_samples(width: int, height: int) -> int:
    return width * height + 2 * (width // 2) * (height // 2)


def frame_byte_size(width: int, height: int) -> int:
    return frame_samples(width, height) * _WORD.itemsize


def _check_dims(width: int, height: int):
    if width <= 0 or height <= 0 or width % 2 or height % 2:
        raise ContractError(f"dimensions must be positive and even, got {width}x{height}")


def decode_raw(data: bytes, width: int, height: int) -> list[Frame420]:
    _check_dims(width, height)
    fbytes = frame_byte_size(width, height)
    if len(data) % fbytes:
        raise MalformedInputError(
            f"{len(data)} bytes is not a multiple of the {fbytes}-byte frame size"
        )
    words = np.frombuffer(data, dtype=_WORD)
    if words.size and words.max() > MAX_SAMPLE:
        bad = int(np.argmax(words > MAX_SAMPLE))
        raise SampleRangeError(f"sample {words[bad]} at word {bad} exceeds {MAX_SAMPLE}")
    nluma = width * height
    nchroma = (width // 2) * (height // 2)
    per_frame = frame_samples(width, height)
    frames = []
    for idx in range(len(data) // fbytes):
        chunk = words[idx * per_frame:(idx + 1) * per_frame].astype(np.uint16)
        y = chunk[:nluma].reshape(height, width)
        u = chunk[nluma:nluma + nchroma].reshape(height // 2, width // 2)
        v = chunk[nluma + nchroma:].reshape(height // 2, width // 2)
        frames.append(Frame420(y, u, v, idx))
    return frames


def encode_raw(frames: Sequence[Frame420]) -> bytes:
    if not frames:
        return b""
    shape = frames[0].y.shape
    parts = []
    for f in frames:
        if f.y.shape != shape:
            raise ContractError(f"frame {f.poc} is {f.y.shape[::-1]}, expected {shape[::-1]}")
        for plane in f.planes:
            check_plane(plane)
            parts.append(plane.astype(_WORD).tobytes())
    return b"".join(parts)


def read_raw_video(path: str | os.PathLike, width: int, height: int) -> list[Frame420]:
    with open(path, "rb") as fh:
        return decode_raw(fh.read(), width, height)


def read_raw_frame(path: str | os.PathLike, width: int, height: int, index: int) -> Frame420:
    """Read a single frame without loading the whole file."""
    _check_dims(width, height)
    fbytes = frame_byte_size(width, height)
    with open(path, "rb") as fh:
        fh.seek(index * fbytes)
        data = fh.read(fbytes)
    if len(data) != fbytes:
        raise MalformedInputError(f"{path}: frame {index} is truncated")
    frame = decode_raw(data, width, height)[0]
    frame.poc = index
    return frame


def write_raw_video(frames: Iterable[Frame420], path: str | os.PathLike) -> int:
    data = encode_raw(list(frames))
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)
