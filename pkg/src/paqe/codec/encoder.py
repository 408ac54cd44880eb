from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from ..coding_meta import BlockRecord, BlockType, FrameMeta, InterMode
from ..errors import ContractError
from ..frame_io import Frame420
from .config import EncoderConfig, RDDecision, lambda_of_qp
from .gop import coding_order
from .inter import (INTER_MODE_BITS, SKIP_BITS, PaddedRef, chroma_mv, motion_compensate,
                    motion_search, mv_bits)
from .intra import IntraMode, Neighbors, intra_predict_block, rd_select_intra_mode
from .quant import quantize_residual, reconstruct, residual_bits, sse

LEVEL_DTYPE = np.dtype("<i2")


class InLoopFilter(Protocol):
    """Hook run on each reconstructed frame before it enters the reference buffer."""

    def encode_frame(self, recon: Frame420, pred: Frame420, meta: FrameMeta,
                     orig: Frame420) -> tuple[Frame420, bool]: ...

    def decode_frame(self, recon: Frame420, pred: Frame420, meta: FrameMeta) -> Frame420: ...


@dataclass
class EncodeResult:
    recon: list[Frame420]  # display order, post in-loop filter
    pred: list[Frame420]  # display order
    metas: list[FrameMeta]  # coding order
    residual: bytes
    rates: list[int]  # bits per frame, display order
    rd_log: list[tuple[int, int, RDDecision]] = field(default_factory=list)

    @property
    def metas_by_poc(self) -> dict[int, FrameMeta]:
        return {m.poc: m for m in self.metas}

    @property
    def total_bits(self) -> int:
        return int(sum(self.rates))


def block_grid(width: int, height: int, block_size: int) -> list[tuple[int, int, int, int]]:
    """Raster-order tiling; right/bottom blocks are clipped to the frame."""
    return [(x, y, min(block_size, width - x), min(block_size, height - y))
            for y in range(0, height, block_size)
            for x in range(0, width, block_size)]


def _chroma_rect(x, y, w, h):
    x0, y0 = x // 2, y // 2
    return x0, y0, (x + w) // 2 - x0, (y + h) // 2 - y0


def padded_refs(frame: Frame420, margin: int) -> tuple[PaddedRef, PaddedRef, PaddedRef]:
    return (PaddedRef(frame.y, margin), PaddedRef(frame.u, (margin + 1) // 2 + 1),
            PaddedRef(frame.v, (margin + 1) // 2 + 1))


def predict_plane_block(plane_idx: int, rec_plane: np.ndarray, rect, btype: BlockType, mode,
                        refs: dict[int, tuple[PaddedRef, ...]]) -> np.ndarray:
    """Prediction for one plane of a block, shared by encoder and decoder."""
    x, y, w, h = rect
    if btype == BlockType.INTRA:
        return intra_predict_block(Neighbors.from_plane(rec_plane, x, y, w, h), IntraMode(mode), w, h)
    try:
        ref = refs[mode.ref][plane_idx]
    except KeyError:
        raise ContractError(f"reference poc {mode.ref} is not in the reference buffer") from None
    mv = mode.mv if plane_idx == 0 else chroma_mv(mode.mv)
    return motion_compensate(ref, x, y, w, h, mv)


def _choose_luma(orig_y, rec_y, x, y, w, h, qp, lam, ref_list, refs, search_range):
    """Candidate competition on luma: intra, inter per reference, skip per reference."""
    dec, pred, levels, rec = rd_select_intra_mode(orig_y, Neighbors.from_plane(rec_y, x, y, w, h), qp, lam)
    best = (dec, BlockType.INTRA, dec.mode, pred, levels, rec)
    skips = []
    for ref_poc in ref_list:
        ref_y = refs[ref_poc][0]
        mv, _ = motion_search(orig_y, ref_y, x, y, search_range)
        pred = motion_compensate(ref_y, x, y, w, h, mv)
        levels = quantize_residual(orig_y.astype(np.int64) - pred, qp)
        rec = reconstruct(pred, levels, qp)
        mode = InterMode(mv, ref_poc)
        dec = RDDecision(mode, sse(orig_y, rec), INTER_MODE_BITS + mv_bits(mv) + residual_bits(levels), lam)
        if dec.cost < best[0].cost:
            best = (dec, BlockType.INTER, mode, pred, levels, rec)
        skip_dec = RDDecision(mode, sse(orig_y, pred), SKIP_BITS, lam)
        skips.append((skip_dec, BlockType.SKIP, mode, pred, None, pred.astype(np.uint16)))
    for cand in skips:
        if cand[0].cost < best[0].cost:
            best = cand
    return best


def encode_sequence(frames: Sequence[Frame420], config: EncoderConfig,
                    loop_filter: Optional[InLoopFilter] = None) -> EncodeResult:
    if len(frames) < 1:
        raise ContractError("need at least one frame")
    config.validate()
    height, width = frames[0].y.shape
    for f in frames:
        if f.y.shape != (height, width):
            raise ContractError("all frames must share dimensions")
    grid = block_grid(width, height, config.block_size)

    dpb: dict[int, Frame420] = {}
    refs: dict[int, tuple[PaddedRef, ...]] = {}
    recon_out: dict[int, Frame420] = {}
    pred_out: dict[int, Frame420] = {}
    rates: dict[int, int] = {}
    metas: list[FrameMeta] = []
    residual_parts: list[bytes] = []
    rd_log = []

    for plan in coding_order(len(frames), config.gop_size, config.intra_period):
        orig = frames[plan.poc]
        qp = config.frame_qp(plan.temporal_layer)
        lam = lambda_of_qp(qp, config.lambda_scale)
        rec_planes = [np.zeros_like(p) for p in orig.planes]
        pred_planes = [np.zeros_like(p) for p in orig.planes]
        blocks = []
        bits = 0
        for bidx, (x, y, w, h) in enumerate(grid):
            dec, btype, mode, pred_y, lv_y, rec_y = _choose_luma(
                orig.y[y:y + h, x:x + w], rec_planes[0], x, y, w, h, qp, lam,
                plan.refs, refs, config.search_range)
            rd_log.append((plan.poc, bidx, dec))
            bits += dec.rate
            rec_planes[0][y:y + h, x:x + w] = rec_y
            pred_planes[0][y:y + h, x:x + w] = pred_y
            levels = [lv_y]
            crect = _chroma_rect(x, y, w, h)
            cx, cy, cw, ch = crect
            for pi in (1, 2):
                pred_c = predict_plane_block(pi, rec_planes[pi], crect, btype, mode, refs)
                pred_planes[pi][cy:cy + ch, cx:cx + cw] = pred_c
                if btype == BlockType.SKIP:
                    rec_planes[pi][cy:cy + ch, cx:cx + cw] = pred_c
                    continue
                orig_c = orig.planes[pi][cy:cy + ch, cx:cx + cw]
                lv_c = quantize_residual(orig_c.astype(np.int64) - pred_c, qp)
                rec_planes[pi][cy:cy + ch, cx:cx + cw] = reconstruct(pred_c, lv_c, qp)
                bits += residual_bits(lv_c)
                levels.append(lv_c)
            if btype != BlockType.SKIP:
                residual_parts.extend(lv.astype(LEVEL_DTYPE).tobytes() for lv in levels)
            blocks.append(BlockRecord(x, y, w, h, btype, qp, mode))

        meta = FrameMeta(plan.poc, plan.frame_type, plan.temporal_layer, config.base_qp, blocks)
        recon = Frame420(*rec_planes, poc=plan.poc)
        pred = Frame420(*pred_planes, poc=plan.poc)
        if loop_filter is not None:
            recon, meta.ilf_flag = loop_filter.encode_frame(recon, pred, meta, orig)
            bits += 1  # frame-level on/off flag
        metas.append(meta)
        dpb[plan.poc] = recon
        refs[plan.poc] = padded_refs(recon, config.search_range)
        recon_out[plan.poc] = recon
        pred_out[plan.poc] = pred
        rates[plan.poc] = bits

    n = len(frames)
    return EncodeResult(
        recon=[recon_out[p] for p in range(n)],
        pred=[pred_out[p] for p in range(n)],
        metas=metas,
        residual=b"".join(residual_parts),
        rates=[rates[p] for p in range(n)],
        rd_log=rd_log,
    )
