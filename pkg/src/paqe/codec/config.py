from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..coding_meta import QP_MAX, QP_MIN
from ..errors import ContractError

# lambda(40) == 301, the operating point quoted for a 16x16 block at QP 40
DEFAULT_LAMBDA_SCALE = 301.0 / 2.0 ** ((40 - 12) / 3.0)

DEFAULT_LAYER_QP_OFFSETS = (-4, -2, 0, 1, 2)


def _check_qp(qp: int) -> None:
    if not QP_MIN <= qp <= QP_MAX:
        raise ContractError(f"qp {qp} outside [{QP_MIN}, {QP_MAX}]")


def lambda_of_qp(qp: int, scale: float = DEFAULT_LAMBDA_SCALE) -> float:
    _check_qp(qp)
    return scale * 2.0 ** ((qp - 12) / 3.0)


@dataclass
class EncoderConfig:
    base_qp: int = 32
    block_size: int = 16
    gop_size: int = 16
    intra_period: int = 32  # 0: only the first frame is intra; 1: all-intra
    layer_qp_offsets: tuple[int, ...] = DEFAULT_LAYER_QP_OFFSETS
    search_range: int = 8
    lambda_scale: float = DEFAULT_LAMBDA_SCALE

    def __post_init__(self):
        self.layer_qp_offsets = tuple(int(o) for o in self.layer_qp_offsets)
        self.validate()

    def validate(self) -> None:
        _check_qp(self.base_qp)
        if self.gop_size < 2 or self.gop_size & (self.gop_size - 1):
            raise ContractError(f"gop_size must be a power of two >= 2, got {self.gop_size}")
        if self.block_size < 4 or self.block_size % 2:
            raise ContractError(f"block_size must be even and >= 4, got {self.block_size}")
        if self.intra_period < 0:
            raise ContractError("intra_period must be >= 0")
        if self.intra_period > 1 and self.intra_period % self.gop_size:
            raise ContractError("intra_period must be a multiple of gop_size")
        if self.search_range < 0:
            raise ContractError("search_range must be >= 0")
        if self.lambda_scale <= 0:
            raise ContractError("lambda_scale must be positive")
        needed = int(math.log2(self.gop_size)) + 1
        if len(self.layer_qp_offsets) < needed:
            raise ContractError(
                f"layer_qp_offsets needs {needed} entries for gop_size {self.gop_size}"
            )

    def frame_qp(self, temporal_layer: int) -> int:
        qp = self.base_qp + self.layer_qp_offsets[temporal_layer]
        return min(max(qp, QP_MIN), QP_MAX)

    def to_dict(self) -> dict:
        return {
            "base_qp": self.base_qp,
            "block_size": self.block_size,
            "gop_size": self.gop_size,
            "intra_period": self.intra_period,
            "layer_qp_offsets": list(self.layer_qp_offsets),
            "search_range": self.search_range,
            "lambda_scale": self.lambda_scale,
        }


@dataclass(frozen=True)
class RDDecision:
    mode: object
    distortion: int
    rate: int
    lam: float
    cost: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "cost", self.distortion + self.lam * self.rate)
