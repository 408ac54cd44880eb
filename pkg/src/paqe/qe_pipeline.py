"""Decoder-side enhancement of reconstructed planes.

Intra frames go through the intra model in one full-frame pass. Inter
frames are enhanced block by block according to the block-type mask:
intra blocks with the intra model, inter blocks with the inter model and
skip blocks with the prediction-unaware model (no prediction channel).
Every block is processed together with a halo as wide as the model's
receptive field, clipped to the plane, so the block-level result equals
the frame-level one exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coding_meta import BlockType, FrameMeta, build_block_type_mask, build_qp_map
from .errors import ContractError
from .frame_io import MAX_SAMPLE, Frame420
from .models import ModelTriple
from .nn import QENetwork

PLANE_IDS = ("Y", "U", "V")


@dataclass
class EnhanceRequest:
    recon: np.ndarray
    pred: Optional[np.ndarray]
    meta: FrameMeta
    plane_id: str
    models: ModelTriple

    def __post_init__(self):
        if self.plane_id not in PLANE_IDS:
            raise ContractError(f"plane_id must be one of {PLANE_IDS}")
        if self.pred is not None and self.pred.shape != self.recon.shape:
            raise ContractError("recon and pred planes differ in size")

    @property
    def is_chroma(self) -> bool:
        return self.plane_id != "Y"

    def luma_size(self) -> tuple[int, int]:
        h, w = self.recon.shape
        return (w * 2, h * 2) if self.is_chroma else (w, h)

    def qp_map(self) -> np.ndarray:
        w, h = self.luma_size()
        return build_qp_map(self.meta, w, h, chroma=self.is_chroma)

    def type_mask(self) -> np.ndarray:
        w, h = self.luma_size()
        return build_block_type_mask(self.meta, w, h, chroma=self.is_chroma)

    def rects(self):
        for blk in self.meta.blocks:
            rect = blk.chroma_rect() if self.is_chroma else (blk.x, blk.y, blk.w, blk.h)
            yield blk.block_type, rect


def normalize(plane: np.ndarray) -> np.ndarray:
    return plane.astype(np.float32) / np.float32(MAX_SAMPLE)


def assemble_input(recon: np.ndarray, pred: Optional[np.ndarray], qp_map: np.ndarray) -> np.ndarray:
    """(1, 3, H, W) tensor [P, C, Q], or (1, 2, H, W) [C, Q] without prediction."""
    if qp_map.shape != recon.shape or (pred is not None and pred.shape != recon.shape):
        raise ContractError("input planes differ in size")
    chans = [normalize(recon), qp_map.astype(np.float32)]
    if pred is not None:
        chans.insert(0, normalize(pred))
    return np.stack(chans)[None]


def to_pixels(out: np.ndarray) -> np.ndarray:
    """Network output in [0, 1] units to clamped, half-up rounded 10-bit samples."""
    vals = np.clip(out.astype(np.float64), 0.0, 1.0) * MAX_SAMPLE
    return np.floor(vals + 0.5).astype(np.uint16)


def run_model(model: QENetwork, recon, pred, qp_map) -> np.ndarray:
    aware = model.in_channels == 3
    if aware and pred is None:
        raise ContractError("prediction-aware model needs a prediction plane")
    x = assemble_input(recon, pred if aware else None, qp_map)
    return to_pixels(model.forward(x, "infer")[0, 0])


def _model_for(models: ModelTriple, btype: BlockType) -> QENetwork:
    if btype == BlockType.INTRA:
        return models.intra
    if btype == BlockType.INTER:
        return models.inter
    if btype == BlockType.SKIP:
        return models.unaware
    raise ContractError(f"unknown block type {btype!r}")


def enhance_intra_frame(req: EnhanceRequest, trace: Optional[list] = None) -> np.ndarray:
    if req.models.intra.in_channels != 3:
        raise ContractError("intra model must be prediction-aware (3 input channels)")
    if trace is not None:
        trace.append((req.plane_id, "frame", req.models.intra))
    return run_model(req.models.intra, req.recon, req.pred, req.qp_map())


def enhance_inter_frame_blocks(req: EnhanceRequest, trace: Optional[list] = None) -> np.ndarray:
    qp_map = req.qp_map()
    h, w = req.recon.shape
    out = np.empty_like(req.recon, dtype=np.uint16)
    for btype, (x, y, bw, bh) in req.rects():
        model = _model_for(req.models, btype)
        r = model.config.receptive_radius
        x0, y0 = max(x - r, 0), max(y - r, 0)
        x1, y1 = min(x + bw + r, w), min(y + bh + r, h)
        win = np.s_[y0:y1, x0:x1]
        pred = req.pred[win] if model.in_channels == 3 else None
        if trace is not None:
            trace.append((req.plane_id, btype.label, model, model.in_channels))
        enhanced = run_model(model, req.recon[win], pred, qp_map[win])
        out[y:y + bh, x:x + bw] = enhanced[y - y0:y - y0 + bh, x - x0:x - x0 + bw]
    return out


def enhance_inter_frame_masked(req: EnhanceRequest, trace: Optional[list] = None) -> np.ndarray:
    """Frame-level alternative: one full pass per present block type, composed by the mask."""
    qp_map = req.qp_map()
    mask = req.type_mask()
    out = np.empty_like(req.recon, dtype=np.uint16)
    for btype in BlockType:
        sel = mask == int(btype)
        if not sel.any():
            continue
        model = _model_for(req.models, btype)
        if trace is not None:
            trace.append((req.plane_id, btype.label, model, model.in_channels))
        full = run_model(model, req.recon, req.pred if model.in_channels == 3 else None, qp_map)
        out[sel] = full[sel]
    return out


def enhance_inter_frame(req: EnhanceRequest, granularity: str = "block",
                        trace: Optional[list] = None) -> np.ndarray:
    if granularity == "block":
        return enhance_inter_frame_blocks(req, trace)
    if granularity == "frame":
        return enhance_inter_frame_masked(req, trace)
    raise ValueError(f"granularity must be 'block' or 'frame', got {granularity!r}")


def enhance_plane(req: EnhanceRequest, granularity: str = "block", trace: Optional[list] = None) -> np.ndarray:
    if req.meta.frame_type == "I":
        return enhance_intra_frame(req, trace)
    return enhance_inter_frame(req, granularity, trace)


def enhance_frame420(recon: Frame420, pred: Frame420, meta: FrameMeta, models: ModelTriple,
                     granularity: str = "block", trace: Optional[list] = None) -> Frame420:
    planes = []
    for pid, rplane, pplane in zip(PLANE_IDS, recon.planes, pred.planes):
        planes.append(enhance_plane(EnhanceRequest(rplane, pplane, meta, pid, models), granularity, trace))
    return Frame420(*planes, poc=recon.poc)


def enhance_unaware_frame420(recon: Frame420, meta: FrameMeta, model: QENetwork) -> Frame420:
    """Prediction-unaware baseline: one 2-channel model on every plane, frame level."""
    planes = []
    for pid, rplane in zip(PLANE_IDS, recon.planes):
        chroma = pid != "Y"
        qp_map = build_qp_map(meta, recon.width, recon.height, chroma=chroma)
        planes.append(run_model(model, rplane, None, qp_map))
    return Frame420(*planes, poc=recon.poc)
