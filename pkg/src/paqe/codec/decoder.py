from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..coding_meta import BlockType, FrameMeta, check_tiling
from ..errors import ContractError, MalformedInputError
from ..frame_io import Frame420
from .encoder import LEVEL_DTYPE, InLoopFilter, padded_refs, predict_plane_block
from .quant import reconstruct

_DEFAULT_MARGIN = 8


class _LevelReader:
    def __init__(self, data: bytes):
        self.levels = np.frombuffer(data, dtype=LEVEL_DTYPE) if len(data) % 2 == 0 else None
        if self.levels is None:
            raise MalformedInputError("residual sidecar has an odd byte count")
        self.pos = 0

    def take(self, count: int, where: str) -> np.ndarray:
        if self.pos + count > self.levels.size:
            raise MalformedInputError(f"residual sidecar truncated at {where}")
        out = self.levels[self.pos:self.pos + count].astype(np.int16)
        self.pos += count
        return out


def decode_sequence(metas: Sequence[FrameMeta], residual: bytes, width: int, height: int,
                    loop_filter: Optional[InLoopFilter] = None
                    ) -> tuple[list[Frame420], list[Frame420]]:
    """Rebuild reconstruction and prediction streams from metadata and levels.

    ``metas`` must be in coding order. Returns (recon, pred) in display order.
    """
    reader = _LevelReader(residual)
    refs = {}
    recon_out: dict[int, Frame420] = {}
    pred_out: dict[int, Frame420] = {}
    cw, ch = width // 2, height // 2
    for meta in metas:
        check_tiling(meta, width, height)
        rec_planes = [np.zeros((height, width), np.uint16),
                      np.zeros((ch, cw), np.uint16), np.zeros((ch, cw), np.uint16)]
        pred_planes = [np.zeros_like(p) for p in rec_planes]
        for bidx, blk in enumerate(meta.blocks):
            skip = blk.block_type == BlockType.SKIP
            for pi in range(3):
                rect = (blk.x, blk.y, blk.w, blk.h) if pi == 0 else blk.chroma_rect()
                x, y, w, h = rect
                pred = predict_plane_block(pi, rec_planes[pi], rect, blk.block_type, blk.mode, refs)
                pred_planes[pi][y:y + h, x:x + w] = pred
                if skip:
                    rec_planes[pi][y:y + h, x:x + w] = pred
                else:
                    levels = reader.take(w * h, f"poc {meta.poc} block {bidx}").reshape(h, w)
                    rec_planes[pi][y:y + h, x:x + w] = reconstruct(pred, levels, blk.qp)
        recon = Frame420(*rec_planes, poc=meta.poc)
        pred = Frame420(*pred_planes, poc=meta.poc)
        if meta.ilf_flag:
            if loop_filter is None:
                raise ContractError(f"poc {meta.poc} is flagged for in-loop enhancement but no models were given")
            recon = loop_filter.decode_frame(recon, pred, meta)
        refs[meta.poc] = padded_refs(recon, _DEFAULT_MARGIN)
        recon_out[meta.poc] = recon
        pred_out[meta.poc] = pred
    if reader.pos != reader.levels.size:
        raise MalformedInputError(
            f"residual sidecar has {reader.levels.size - reader.pos} unconsumed levels"
        )
    pocs = sorted(recon_out)
    if pocs != list(range(len(pocs))):
        raise MalformedInputError("metadata does not cover a contiguous poc range")
    return [recon_out[p] for p in pocs], [pred_out[p] for p in pocs]
