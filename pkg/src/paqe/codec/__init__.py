"""Toy block-based hybrid codec producing coding side-information."""

from .config import DEFAULT_LAMBDA_SCALE, EncoderConfig, RDDecision, lambda_of_qp
from .decoder import decode_sequence
from .encoder import EncodeResult, InLoopFilter, block_grid, encode_sequence
from .gop import FramePlan, coding_order
from .inter import motion_search
from .intra import IntraMode, Neighbors, intra_predict_block, rd_select_intra_mode
from .quant import dequantize, quant_step, quantize_residual

__all__ = [
    "DEFAULT_LAMBDA_SCALE", "EncoderConfig", "RDDecision", "lambda_of_qp",
    "decode_sequence", "EncodeResult", "InLoopFilter", "block_grid", "encode_sequence",
    "FramePlan", "coding_order", "motion_search", "IntraMode", "Neighbors",
    "intra_predict_block", "rd_select_intra_mode", "dequantize", "quant_step",
    "quantize_residual",
]
