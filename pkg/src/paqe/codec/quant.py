"""Spatial-domain uniform scalar quantization of prediction residuals."""

import numpy as np

from ..frame_io import MAX_SAMPLE

RESIDUAL_BITS_PER_COEFF = 6


def quant_step(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_residual(residual: np.ndarray, qp: int) -> np.ndarray:
    levels = _round_half_away(np.asarray(residual, np.float64) / quant_step(qp))
    return levels.astype(np.int16)


def dequantize(levels: np.ndarray, qp: int) -> np.ndarray:
    return levels.astype(np.float64) * quant_step(qp)


def reconstruct(pred: np.ndarray, levels: np.ndarray, qp: int) -> np.ndarray:
    """C = P + dequantized residual, rounded half-up and clipped to 10 bits."""
    rec = np.floor(pred.astype(np.float64) + dequantize(levels, qp) + 0.5)
    return np.clip(rec, 0, MAX_SAMPLE).astype(np.uint16)


def residual_bits(levels: np.ndarray) -> int:
    return int(np.count_nonzero(levels)) * RESIDUAL_BITS_PER_COEFF + 1


def sse(a: np.ndarray, b: np.ndarray) -> int:
    d = a.astype(np.int64) - b.astype(np.int64)
    return int(np.sum(d * d))
