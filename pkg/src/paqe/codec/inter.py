"""Integer-pel full-search block matching and motion compensation."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

INTER_MODE_BITS = 2
SKIP_BITS = 1


class PaddedRef:
    """Reference plane with edge-replicated margins for clamped fetches."""

    def __init__(self, plane: np.ndarray, margin: int):
        self.margin = margin
        self.data = np.pad(plane.astype(np.int64), margin, mode="edge")
        self.height, self.width = plane.shape

    def fetch(self, x: int, y: int, w: int, h: int) -> np.ndarray:
        m = self.margin
        if -m <= x and x + w <= self.width + m and -m <= y and y + h <= self.height + m:
            return self.data[y + m:y + m + h, x + m:x + m + w]
        # displacement beyond the margin: clamp coordinates explicitly
        ys = np.clip(np.arange(y, y + h), 0, self.height - 1) + m
        xs = np.clip(np.arange(x, x + w), 0, self.width - 1) + m
        return self.data[np.ix_(ys, xs)]


def motion_search(cur: np.ndarray, ref: PaddedRef | np.ndarray, x: int, y: int,
                  search_range: int) -> tuple[tuple[int, int], int]:
    """Full search over [-range, range]^2 minimizing SAD.

    Ties prefer the smaller L1 motion vector, then raster order of (dy, dx).
    Returns ((dx, dy), sad).
    """
    if not isinstance(ref, PaddedRef):
        ref = PaddedRef(ref, search_range)
    h, w = cur.shape
    r = search_range
    window = ref.fetch(x - r, y - r, w + 2 * r, h + 2 * r)
    cands = sliding_window_view(window, (h, w))  # [dy + r, dx + r, h, w]
    sad = np.abs(cands - cur.astype(np.int64)[None, None]).sum(axis=(2, 3))
    offs = np.arange(-r, r + 1)
    l1 = np.abs(offs)[:, None] + np.abs(offs)[None, :]
    # lexsort: last key is primary
    order = np.lexsort((np.arange(sad.size), l1.ravel(), sad.ravel()))
    iy, ix = divmod(int(order[0]), 2 * r + 1)
    return (ix - r, iy - r), int(sad[iy, ix])


def motion_compensate(ref: PaddedRef, x: int, y: int, w: int, h: int, mv: tuple[int, int]) -> np.ndarray:
    return ref.fetch(x + mv[0], y + mv[1], w, h)


def chroma_mv(mv: tuple[int, int]) -> tuple[int, int]:
    return mv[0] >> 1, mv[1] >> 1


def se_bits(v: int) -> int:
    """Length of the signed Exp-Golomb code for v."""
    code = 2 * abs(v) - 1 if v > 0 else 2 * abs(v)
    return 2 * (code + 1).bit_length() - 1


def mv_bits(mv: tuple[int, int]) -> int:
    return se_bits(mv[0]) + se_bits(mv[1])
