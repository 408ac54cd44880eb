"""Dyadic hierarchical-B coding structure (random access)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FramePlan:
    poc: int
    frame_type: str
    temporal_layer: int
    refs: tuple[int, ...] = ()


def _bisect(lo: int, hi: int, depth: int, out: list[FramePlan]) -> None:
    if hi - lo < 2:
        return
    mid = (lo + hi) // 2
    out.append(FramePlan(mid, "B", depth, (lo, hi)))
    _bisect(lo, mid, depth + 1, out)
    _bisect(mid, hi, depth + 1, out)


def coding_order(n_frames: int, gop_size: int, intra_period: int) -> list[FramePlan]:
    """Frames in coding order with their layer and references.

    Each GOP codes its anchor first (layer 0, referencing the previous
    anchor), then recursively the midpoint of every interval between two
    coded frames, referencing both interval ends.
    """
    if n_frames < 1:
        return []
    if intra_period == 1:
        return [FramePlan(p, "I", 0) for p in range(n_frames)]
    plan = [FramePlan(0, "I", 0)]
    prev = 0
    while prev < n_frames - 1:
        anchor = min(prev + gop_size, n_frames - 1)
        if intra_period and anchor % intra_period == 0:
            plan.append(FramePlan(anchor, "I", 0))
        else:
            plan.append(FramePlan(anchor, "B", 0, (prev,)))
        _bisect(prev, anchor, 1, plan)
        prev = anchor
    return plan
