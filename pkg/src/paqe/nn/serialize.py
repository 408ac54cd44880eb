"""Bit-exact weight container.

Layout (all little-endian): magic ``PAQE``, u32 version, u32 in_channels,
u32 channels, u32 n_blocks, then for every tensor in declaration order a
u32 rank, rank x u32 dims, and the float32 data.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import WeightFormatError
from .network import NetConfig, QENetwork

MAGIC = b"PAQE"
VERSION = 1
_F32 = np.dtype("<f4")


def dumps_weights(net: QENetwork) -> bytes:
    cfg = net.config
    parts = [MAGIC, struct.pack("<4I", VERSION, cfg.in_channels, cfg.channels, cfg.n_blocks)]
    for _, arr in net.named_tensors():
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.astype(_F32).tobytes())
    return b"".join(parts)


def loads_weights(data: bytes) -> QENetwork:
    if data[:4] != MAGIC:
        raise WeightFormatError("bad magic, not a weight file")
    try:
        version, in_ch, ch, n_blocks = struct.unpack_from("<4I", data, 4)
    except struct.error:
        raise WeightFormatError("truncated header") from None
    if version != VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    try:
        net = QENetwork(NetConfig(in_ch, ch, n_blocks), seed=None)
    except ValueError as exc:
        raise WeightFormatError(f"invalid header: {exc}") from None
    pos = 20
    tensors = []
    for name, ref in net.named_tensors():
        try:
            (rank,) = struct.unpack_from("<I", data, pos)
            shape = struct.unpack_from(f"<{rank}I", data, pos + 4)
        except struct.error:
            raise WeightFormatError(f"truncated before tensor {name}") from None
        pos += 4 + 4 * rank
        if tuple(shape) != ref.shape:
            raise WeightFormatError(f"tensor {name} has shape {shape}, expected {ref.shape}")
        nbytes = ref.size * _F32.itemsize
        if pos + nbytes > len(data):
            raise WeightFormatError(f"truncated data in tensor {name}")
        tensors.append(np.frombuffer(data, _F32, ref.size, pos).reshape(shape))
        pos += nbytes
    if pos != len(data):
        raise WeightFormatError(f"{len(data) - pos} trailing bytes: layer count does not match header")
    net.load_state(tensors)
    return net


def save_weights(net: QENetwork, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_weights(net))


def load_weights(path: str | os.PathLike) -> QENetwork:
    with open(path, "rb") as fh:
        return loads_weights(fh.read())
