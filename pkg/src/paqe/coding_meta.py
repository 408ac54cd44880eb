"""Per-frame coding side-information and the rasters derived from it.

Metadata travels as JSON lines, one frame per line::

    {"poc": 3, "frame_type": "B", "temporal_layer": 4, "base_qp": 32,
     "ilf_flag": false, "blocks": [{"x": 0, "y": 0, "w": 16, "h": 16,
     "type": "skip", "qp": 34, "mode": {"mv": [0, 0], "ref": 2}}, ...]}

Intra blocks carry the integer intra mode index in ``mode``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .errors import ContractError, MetaParseError

QP_MIN = 1
QP_MAX = 63


class BlockType(enum.IntEnum):
    INTRA = 0
    INTER = 1
    SKIP = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "BlockType":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown block type {label!r}") from None


@dataclass(frozen=True)
class InterMode:
    mv: tuple[int, int]  # (dx, dy) in luma pixels
    ref: int  # poc of the reference frame


ModeInfo = Union[int, InterMode, None]


@dataclass(frozen=True)
class BlockRecord:
    x: int
    y: int
    w: int
    h: int
    block_type: BlockType
    qp: int
    mode: ModeInfo = None

    def __post_init__(self):
        if not QP_MIN <= self.qp <= QP_MAX:
            raise ContractError(f"block qp {self.qp} outside [{QP_MIN}, {QP_MAX}]")
        if self.w <= 0 or self.h <= 0 or self.x < 0 or self.y < 0:
            raise ContractError(f"degenerate block geometry {self.x},{self.y} {self.w}x{self.h}")

    def chroma_rect(self) -> tuple[int, int, int, int]:
        """Rectangle on the half-resolution chroma grid."""
        x0, y0 = self.x // 2, self.y // 2
        x1, y1 = (self.x + self.w) // 2, (self.y + self.h) // 2
        return x0, y0, x1 - x0, y1 - y0


@dataclass
class FrameMeta:
    poc: int
    frame_type: str  # "I" or "B"
    temporal_layer: int
    base_qp: int
    blocks: list[BlockRecord] = field(default_factory=list)
    ilf_flag: bool = False

    def __post_init__(self):
        if self.frame_type not in ("I", "B"):
            raise ContractError(f"frame_type must be 'I' or 'B', got {self.frame_type!r}")
        if self.temporal_layer < 0:
            raise ContractError("temporal_layer must be non-negative")
        if self.frame_type == "I" and any(b.block_type != BlockType.INTRA for b in self.blocks):
            raise ContractError(f"I-frame {self.poc} contains non-intra blocks")

    @property
    def frame_qp(self) -> Optional[int]:
        return self.blocks[0].qp if self.blocks else None


def _tiling_index(meta: FrameMeta, width: int, height: int, chroma: bool = False) -> np.ndarray:
    """Raster of block indices; raises ContractError on gap, overlap or overflow.

    ``width``/``height`` are luma dimensions; ``chroma`` selects the half grid.
    """
    if chroma:
        width, height = width // 2, height // 2
    owner = np.full((height, width), -1, np.int64)
    for idx, blk in enumerate(meta.blocks):
        x, y, w, h = blk.chroma_rect() if chroma else (blk.x, blk.y, blk.w, blk.h)
        if x + w > width or y + h > height:
            raise ContractError(f"poc {meta.poc}: block {idx} at ({blk.x},{blk.y}) leaves the frame")
        region = owner[y:y + h, x:x + w]
        if (region >= 0).any():
            raise ContractError(f"poc {meta.poc}: block {idx} at ({blk.x},{blk.y}) overlaps another block")
        region[...] = idx
    if (owner < 0).any():
        gy, gx = np.argwhere(owner < 0)[0]
        raise ContractError(f"poc {meta.poc}: pixel ({gx},{gy}) is not covered by any block")
    return owner


def check_tiling(meta: FrameMeta, width: int, height: int) -> None:
    _tiling_index(meta, width, height)


def build_qp_map(meta: FrameMeta, width: int, height: int, chroma: bool = False) -> np.ndarray:
    """Normalized QP raster, each pixel holding its block's qp / 63.

    With ``chroma=True`` the raster is built on the half-resolution grid
    from the luma block geometry.
    """
    owner = _tiling_index(meta, width, height, chroma)
    qps = np.array([b.qp for b in meta.blocks], np.float64)
    return qps[owner] / QP_MAX


def build_block_type_mask(meta: FrameMeta, width: int, height: int, chroma: bool = False) -> np.ndarray:
    owner = _tiling_index(meta, width, height, chroma)
    types = np.array([int(b.block_type) for b in meta.blocks], np.uint8)
    return types[owner]


def _mode_to_json(mode: ModeInfo):
    if isinstance(mode, InterMode):
        return {"mv": list(mode.mv), "ref": mode.ref}
    return mode


def meta_to_dict(meta: FrameMeta) -> dict:
    return {
        "poc": meta.poc,
        "frame_type": meta.frame_type,
        "temporal_layer": meta.temporal_layer,
        "base_qp": meta.base_qp,
        "ilf_flag": meta.ilf_flag,
        "blocks": [
            {"x": b.x, "y": b.y, "w": b.w, "h": b.h, "type": b.block_type.label,
             "qp": b.qp, "mode": _mode_to_json(b.mode)}
            for b in meta.blocks
        ],
    }


def serialize_meta(metas: Iterable[FrameMeta]) -> str:
    return "".join(json.dumps(meta_to_dict(m), separators=(",", ":")) + "\n" for m in metas)


def _parse_block(raw: dict, lineno: int) -> BlockRecord:
    try:
        btype = BlockType.from_label(raw["type"])
    except ValueError as exc:
        raise MetaParseError(lineno, str(exc)) from None
    qp = raw["qp"]
    if not isinstance(qp, int) or not QP_MIN <= qp <= QP_MAX:
        raise MetaParseError(lineno, f"qp {qp!r} outside [{QP_MIN}, {QP_MAX}]")
    mode = raw.get("mode")
    if isinstance(mode, dict):
        mv = mode["mv"]
        mode = InterMode((int(mv[0]), int(mv[1])), int(mode["ref"]))
    elif mode is not None and not isinstance(mode, int):
        raise MetaParseError(lineno, f"bad mode field {mode!r}")
    return BlockRecord(int(raw["x"]), int(raw["y"]), int(raw["w"]), int(raw["h"]), btype, qp, mode)


def parse_meta(text: str) -> list[FrameMeta]:
    metas = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MetaParseError(lineno, f"invalid JSON: {exc.msg}") from None
        try:
            blocks = [_parse_block(b, lineno) for b in raw["blocks"]]
            metas.append(FrameMeta(
                poc=int(raw["poc"]),
                frame_type=raw["frame_type"],
                temporal_layer=int(raw["temporal_layer"]),
                base_qp=int(raw["base_qp"]),
                blocks=blocks,
                ilf_flag=bool(raw["ilf_flag"]),
            ))
        except MetaParseError:
            raise
        except KeyError as exc:
            raise MetaParseError(lineno, f"missing field {exc.args[0]!r}") from None
        except (ContractError, TypeError, ValueError) as exc:
            raise MetaParseError(lineno, str(exc)) from None
    return metas


def read_meta(path) -> list[FrameMeta]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_meta(fh.read())


def write_meta(metas: Iterable[FrameMeta], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_meta(metas))
