"""Reduced intra prediction: DC, planar, horizontal, vertical and 45-degree diagonal."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RDDecision
from .quant import quantize_residual, reconstruct, residual_bits, sse

MID_GRAY = 512
INTRA_MODE_BITS = 3


class IntraMode(enum.IntEnum):
    DC = 0
    PLANAR = 1
    HOR = 2
    VER = 3
    DIAG = 4


@dataclass
class Neighbors:
    """Reconstructed samples bordering a block; any part may be missing."""

    top: Optional[np.ndarray] = None  # w samples above the block
    left: Optional[np.ndarray] = None  # h samples left of the block
    corner: Optional[int] = None  # sample above-left

    @classmethod
    def from_plane(cls, plane: np.ndarray, x: int, y: int, w: int, h: int) -> "Neighbors":
        top = plane[y - 1, x:x + w].astype(np.int64) if y > 0 else None
        left = plane[y:y + h, x - 1].astype(np.int64) if x > 0 else None
        corner = int(plane[y - 1, x - 1]) if x > 0 and y > 0 else None
        return cls(top, left, corner)

    def filled(self, w: int, h: int) -> tuple[np.ndarray, np.ndarray, int]:
        """Substitute missing sides from the available ones (512 when none)."""
        top, left, corner = self.top, self.left, self.corner
        if top is None and left is None:
            return np.full(w, MID_GRAY, np.int64), np.full(h, MID_GRAY, np.int64), MID_GRAY
        if top is None:
            top = np.full(w, left[0], np.int64)
            corner = int(left[0])
        if left is None:
            left = np.full(h, top[0], np.int64)
            corner = int(top[0])
        if corner is None:
            corner = int(top[0])
        return top, left, corner


def intra_predict_block(neighbors: Neighbors, mode: IntraMode, w: int, h: int) -> np.ndarray:
    mode = IntraMode(mode)
    if mode == IntraMode.DC:
        avail = [s for s in (neighbors.top, neighbors.left) if s is not None]
        if not avail:
            return np.full((h, w), MID_GRAY, np.int64)
        samples = np.concatenate(avail)
        dc = (int(samples.sum()) + samples.size // 2) // samples.size
        return np.full((h, w), dc, np.int64)

    top, left, corner = neighbors.filled(w, h)
    if mode == IntraMode.HOR:
        return np.repeat(left[:, None], w, axis=1)
    if mode == IntraMode.VER:
        return np.repeat(top[None, :], h, axis=0)
    if mode == IntraMode.DIAG:
        # down-right diagonal: sample (r, c) copies the border sample on its r - c diagonal
        border = np.concatenate([left[::-1], [corner], top])  # index h + (c - r)
        r = np.arange(h)[:, None]
        c = np.arange(w)[None, :]
        return border[h + c - r]
    # planar: integer bilinear blend of the top row and left column
    r = np.arange(h)[:, None]
    c = np.arange(w)[None, :]
    horiz = (w - 1 - c) * left[:, None] + (c + 1) * top[w - 1]
    vert = (h - 1 - r) * top[None, :] + (r + 1) * left[h - 1]
    return (horiz * h + vert * w + w * h) // (2 * w * h)


def rd_select_intra_mode(orig: np.ndarray, neighbors: Neighbors, qp: int,
                         lam: float) -> tuple[RDDecision, np.ndarray, np.ndarray, np.ndarray]:
    """Pick the intra mode minimizing D + lambda * R.

    Returns the decision plus the chosen prediction, levels and
    reconstruction. Ties go to the lowest mode index.
    """
    h, w = orig.shape
    best = None
    for mode in IntraMode:
        pred = intra_predict_block(neighbors, mode, w, h)
        levels = quantize_residual(orig.astype(np.int64) - pred, qp)
        rec = reconstruct(pred, levels, qp)
        dec = RDDecision(int(mode), sse(orig, rec), INTRA_MODE_BITS + residual_bits(levels), lam)
        if best is None or dec.cost < best[0].cost:
            best = (dec, pred, levels, rec)
    return best
