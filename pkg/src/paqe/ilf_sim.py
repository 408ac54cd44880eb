"""In-loop enhancement inside the toy codec.

The enhanced frame replaces the reconstruction before it enters the
reference buffer, so later frames predict from enhanced samples. A 1-bit
per-frame flag tells the decoder whether to apply the same enhancement.
"""

from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .codec import EncodeResult, EncoderConfig, decode_sequence, encode_sequence
from .coding_meta import BlockType, FrameMeta, build_qp_map
from .errors import ContractError
from .frame_io import Frame420
from .metrics import mse, psnr
from .models import ModelTriple
from .qe_pipeline import PLANE_IDS, enhance_frame420, run_model


class IlfMode(enum.Enum):
    REF = "ref"
    C_I = "ci"
    C_0 = "c0"
    C_1 = "c1"
    C_2 = "c2"
    C_3 = "c3"
    C_4 = "c4"
    ADAPTIVE = "adaptive"

    @classmethod
    def parse(cls, text: str) -> "IlfMode":
        try:
            return cls(text.lower())
        except ValueError:
            raise ValueError(f"unknown ILF mode {text!r}; expected one of "
                             f"{', '.join(m.value for m in cls)}") from None

    @property
    def max_layer(self) -> Optional[int]:
        if self.name.startswith("C_") and self is not IlfMode.C_I:
            return int(self.name[2:])
        return None

    def selects(self, meta: FrameMeta) -> bool:
        """Whether the mode enhances this frame (ADAPTIVE considers every frame)."""
        if self is IlfMode.REF:
            return False
        if self is IlfMode.ADAPTIVE or meta.frame_type == "I":
            return True
        if self is IlfMode.C_I:
            return False
        return meta.temporal_layer <= self.max_layer


FIXED_MODES = (IlfMode.C_I, IlfMode.C_0, IlfMode.C_1, IlfMode.C_2, IlfMode.C_3, IlfMode.C_4)


@dataclass
class IlfConfig:
    mode: IlfMode
    models: Optional[ModelTriple] = None
    granularity: str = "block"

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = IlfMode.parse(self.mode)
        if self.mode is not IlfMode.REF and self.models is None:
            raise ContractError(f"ILF mode {self.mode.value} needs models")


@dataclass(frozen=True)
class IlfDecision:
    poc: int
    mse_before: float
    mse_after: float
    flag: bool


class IlfFilter:
    """InLoopFilter implementation backed by the enhancement pipeline."""

    def __init__(self, config: IlfConfig):
        self.config = config
        self.decisions: list[IlfDecision] = []

    def _enhance(self, recon: Frame420, pred: Frame420, meta: FrameMeta) -> Frame420:
        return enhance_frame420(recon, pred, meta, self.config.models, self.config.granularity)

    def encode_frame(self, recon: Frame420, pred: Frame420, meta: FrameMeta,
                     orig: Frame420) -> tuple[Frame420, bool]:
        if not self.config.mode.selects(meta):
            return recon, False
        enhanced = self._enhance(recon, pred, meta)
        before, after = mse(recon.y, orig.y), mse(enhanced.y, orig.y)
        if self.config.mode is IlfMode.ADAPTIVE:
            flag = after < before  # strict: ties keep the unenhanced frame
        else:
            flag = True
        self.decisions.append(IlfDecision(meta.poc, before, after, flag))
        return (enhanced if flag else recon), flag

    def decode_frame(self, recon: Frame420, pred: Frame420, meta: FrameMeta) -> Frame420:
        return self._enhance(recon, pred, meta)


@dataclass
class IlfResult:
    encode: EncodeResult
    decisions: list[IlfDecision] = field(default_factory=list)

    @property
    def flags(self) -> dict[int, bool]:
        return {m.poc: m.ilf_flag for m in self.encode.metas}


def encode_with_ilf(frames: Sequence[Frame420], enc_config: EncoderConfig, ilf: IlfConfig) -> IlfResult:
    if ilf.mode is IlfMode.REF:
        # no filter attached: byte-identical to the plain encoder, no flag bits
        return IlfResult(encode_sequence(frames, enc_config))
    filt = IlfFilter(ilf)
    result = encode_sequence(frames, enc_config, loop_filter=filt)
    return IlfResult(result, filt.decisions)


def decode_with_ilf(metas: Sequence[FrameMeta], residual: bytes, width: int, height: int,
                    models: Optional[ModelTriple], granularity: str = "block"):
    filt = IlfFilter(IlfConfig(IlfMode.C_4, models, granularity)) if models is not None else None
    return decode_sequence(metas, residual, width, height, loop_filter=filt)


def write_decisions(decisions: Sequence[IlfDecision], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["poc", "mse_before", "mse_after", "flag"])
        for d in sorted(decisions, key=lambda d: d.poc):
            w.writerow([d.poc, repr(d.mse_before), repr(d.mse_after), int(d.flag)])


@dataclass
class EnhancementTrace:
    """Audit of the chain C2 = P2 = enhanced C1 and of the second enhancement."""

    non_skip_blocks: list[tuple[int, int, str]]
    recon_equals_pred: bool  # C2 == P2
    pred_equals_first: bool  # P2 == enhanced frame 1
    double_enhanced: bool  # enhanced frame 2 == f(f(C1)) on every plane
    first_recon: Frame420
    first_enhanced: Frame420
    second_recon: Frame420
    second_enhanced: Frame420

    @property
    def holds(self) -> bool:
        return (not self.non_skip_blocks and self.recon_equals_pred and self.pred_equals_first
                and self.double_enhanced)


def multiple_enhancement_trace(frames: Sequence[Frame420], models: ModelTriple, base_qp: int = 51,
                               mode: IlfMode = IlfMode.C_4) -> EnhancementTrace:
    """Encode a two-frame GOP (I then B) with in-loop enhancement and audit frame 2.

    Frame 2 is expected to be coded entirely in skip mode from the enhanced
    frame 1; blocks that break this are reported rather than asserted.
    """
    if len(frames) != 2:
        raise ContractError("the trace needs exactly two frames")
    cfg = EncoderConfig(base_qp=base_qp, gop_size=2, intra_period=0)
    filt = IlfFilter(IlfConfig(mode, models, "block"))
    # keep the pre-filter reconstructions by wrapping the filter
    raw: dict[int, Frame420] = {}

    class _Spy:
        def encode_frame(self, recon, pred, meta, orig):
            raw[meta.poc] = recon
            return filt.encode_frame(recon, pred, meta, orig)

        def decode_frame(self, recon, pred, meta):
            return filt.decode_frame(recon, pred, meta)

    result = encode_sequence(frames, cfg, loop_filter=_Spy())
    meta2 = result.metas_by_poc[1]
    c1, c1_hat = raw[0], result.recon[0]
    c2, p2, c2_hat = raw[1], result.pred[1], result.recon[1]
    non_skip = [(b.x, b.y, b.block_type.label) for b in meta2.blocks
                if b.block_type != BlockType.SKIP or b.mode.mv != (0, 0)]
    # the double application computed directly from the networks, no dispatcher
    w, h = c1.width, c1.height
    meta1 = result.metas_by_poc[0]
    expected = []
    for pid, c1_plane, p1_plane in zip(PLANE_IDS, c1.planes, result.pred[0].planes):
        chroma = pid != "Y"
        once = run_model(models.intra, c1_plane, p1_plane, build_qp_map(meta1, w, h, chroma))
        twice = run_model(models.unaware, once, None, build_qp_map(meta2, w, h, chroma))
        expected.append(twice)
    double = all(np.array_equal(a, b) for a, b in zip(expected, c2_hat.planes))
    return EnhancementTrace(non_skip, c2 == p2.copy(poc=c2.poc), p2.copy(poc=0) == c1_hat, double,
                            c1, c1_hat, c2, c2_hat)


@dataclass
class SweepRow:
    mode: str
    qp: int
    poc: int
    bits: int
    psnr: float
    mse: float
    sequence: str = ""
    runtime_s: float = 0.0


def run_ilf_sweep(frames: Sequence[Frame420], enc_config: EncoderConfig, models: ModelTriple,
                  qps: Sequence[int], modes: Sequence[IlfMode], sequence: str = "",
                  granularity: str = "block") -> tuple[list[SweepRow], dict]:
    """Per-frame luma PSNR and bits for every (mode, qp); returns rows and decisions per (mode, qp)."""
    rows: list[SweepRow] = []
    decisions = {}
    base = enc_config.to_dict()
    for mode in modes:
        for qp in qps:
            cfg = EncoderConfig(**{**base, "base_qp": int(qp)})
            t0 = time.perf_counter()
            res = encode_with_ilf(frames, cfg, IlfConfig(mode, models, granularity))
            elapsed = (time.perf_counter() - t0) / len(frames)
            decisions[(mode.value, int(qp))] = res.decisions
            for orig, rec, bits in zip(frames, res.encode.recon, res.encode.rates):
                rows.append(SweepRow(mode.value, int(qp), rec.poc, int(bits), psnr(rec.y, orig.y),
                                     mse(rec.y, orig.y), sequence, elapsed))
    return rows, decisions


def sweep_rd_rows(rows: Sequence[SweepRow]):
    """Sweep rows as RD CSV rows (label = mode), ready for the BD report."""
    from .metrics import RDRow
    return [RDRow(r.mode, r.qp, float(r.bits), r.psnr, r.sequence, r.poc, r.runtime_s) for r in rows]


def write_sweep_decisions(decisions: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "qp", "poc", "mse_before", "mse_after", "flag"])
        for (mode, qp), decs in sorted(decisions.items()):
            for d in sorted(decs, key=lambda d: d.poc):
                w.writerow([mode, qp, d.poc, repr(d.mse_before), repr(d.mse_after), int(d.flag)])
