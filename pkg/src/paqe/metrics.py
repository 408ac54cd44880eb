"""PSNR, average PSNR gain, Bjontegaard delta-rate and relative runtime."""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ContractError, MalformedInputError
from .frame_io import MAX_SAMPLE

INFINITE = math.inf  # PSNR of identical planes


def mse(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ContractError(f"plane shapes differ: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray, peak: int = MAX_SAMPLE) -> float:
    err = mse(a, b)
    if err == 0:
        return INFINITE
    return 10.0 * math.log10(peak * peak / err)


def mean_psnr(values: Iterable[float]) -> float:
    vals = list(values)
    finite = [v for v in vals if math.isfinite(v)]
    if len(finite) < len(vals):
        warnings.warn(f"excluding {len(vals) - len(finite)} infinite PSNR value(s) from the average")
    if not finite:
        return INFINITE
    return float(np.mean(finite))


@dataclass(frozen=True)
class RDPoint:
    rate: float
    quality: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ContractError(f"rate must be positive, got {self.rate}")
        if not math.isfinite(self.quality):
            raise ContractError("quality must be finite (infinite PSNR cannot enter a BD fit)")


@dataclass(frozen=True)
class RunRecord:
    sequence: str
    qp: int
    psnr_prop: float
    psnr_ref: float
    rt_prop: float = 1.0
    rt_ref: float = 1.0

    def __post_init__(self):
        if not (self.rt_prop > 0 and self.rt_ref > 0):
            raise ContractError("run times must be positive")


def _grid(records: Sequence[RunRecord]) -> dict[tuple[str, int], RunRecord]:
    if not records:
        raise ContractError("no records")
    cells = {}
    for r in records:
        key = (r.sequence, r.qp)
        if key in cells:
            raise ContractError(f"duplicate record for sequence {r.sequence!r} qp {r.qp}")
        cells[key] = r
    seqs = {k[0] for k in cells}
    qps = {k[1] for k in cells}
    for s in sorted(seqs):
        for q in sorted(qps):
            if (s, q) not in cells:
                raise ContractError(f"missing grid cell: sequence {s!r} qp {q}")
    return cells


def delta_psnr(records: Sequence[RunRecord]) -> float:
    """Mean of psnr_prop - psnr_ref over the complete sequence x qp grid."""
    cells = _grid(records)
    return float(sum(r.psnr_prop - r.psnr_ref for r in cells.values()) / len(cells))


def rt_ratio(records: Sequence[RunRecord]) -> float:
    """Mean of per-cell runtime ratios (not the ratio of total runtimes)."""
    cells = _grid(records)
    return float(sum(r.rt_prop / r.rt_ref for r in cells.values()) / len(cells))


def _prepare(points: Sequence[RDPoint], name: str) -> tuple[np.ndarray, np.ndarray]:
    if len(points) < 4:
        raise ContractError(f"{name} curve needs at least 4 points, got {len(points)}")
    pts = sorted(points, key=lambda p: p.quality)
    q = np.array([p.quality for p in pts], np.float64)
    r = np.array([p.rate for p in pts], np.float64)
    if np.any(np.diff(q) <= 0):
        raise ContractError(f"{name} curve quality is not strictly increasing")
    return q, np.log10(r)


def _poly_integral(coef: np.ndarray, lo: float, hi: float) -> float:
    anti = np.polyint(coef)
    return float(np.polyval(anti, hi) - np.polyval(anti, lo))


def bd_rate(anchor: Sequence[RDPoint], test: Sequence[RDPoint]) -> float:
    """Average bit-rate difference (percent) of ``test`` against ``anchor`` at equal quality.

    Both curves are fitted with a cubic in quality for log10(rate) and the
    fits are integrated in closed form over the overlapping quality range.
    Negative values mean the test curve needs fewer bits.
    """
    qa, la = _prepare(anchor, "anchor")
    qt, lt = _prepare(test, "test")
    lo, hi = max(qa[0], qt[0]), min(qa[-1], qt[-1])
    if not hi > lo:
        raise ContractError("anchor and test quality ranges do not overlap")
    # center the quality axis so the cubic fit stays well conditioned
    center = 0.5 * (lo + hi)
    ca = np.polyfit(qa - center, la, 3)
    ct = np.polyfit(qt - center, lt, 3)
    avg = (_poly_integral(ct, lo - center, hi - center) - _poly_integral(ca, lo - center, hi - center)) / (hi - lo)
    return float((10.0 ** avg - 1.0) * 100.0)


def bd_fits(anchor: Sequence[RDPoint], test: Sequence[RDPoint]):
    """Fitted polynomials (in centered quality) and the integration interval, for inspection."""
    qa, la = _prepare(anchor, "anchor")
    qt, lt = _prepare(test, "test")
    lo, hi = max(qa[0], qt[0]), min(qa[-1], qt[-1])
    center = 0.5 * (lo + hi)
    return np.polyfit(qa - center, la, 3), np.polyfit(qt - center, lt, 3), lo - center, hi - center


# RD CSV: label, qp, rate_bits, quality (+ optional sequence, poc, runtime_s).
RD_FIELDS = ("label", "qp", "rate_bits", "quality")


@dataclass
class RDRow:
    label: str
    qp: int
    rate_bits: float
    quality: float
    sequence: str = ""
    poc: Optional[int] = None
    runtime_s: Optional[float] = None


def read_rd_csv(path) -> list[RDRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f in RD_FIELDS if f not in (reader.fieldnames or [])]
        if missing:
            raise MalformedInputError(f"{path}: missing column(s) {', '.join(missing)}")
        for rownum, raw in enumerate(reader, start=2):
            try:
                rows.append(RDRow(
                    label=raw["label"], qp=int(raw["qp"]), rate_bits=float(raw["rate_bits"]),
                    quality=float(raw["quality"]), sequence=raw.get("sequence") or "",
                    poc=int(raw["poc"]) if raw.get("poc") not in (None, "") else None,
                    runtime_s=float(raw["runtime_s"]) if raw.get("runtime_s") not in (None, "") else None,
                ))
            except (TypeError, ValueError) as exc:
                raise MalformedInputError(f"{path}: row {rownum}: {exc}") from None
    return rows


def write_rd_csv(rows: Iterable[RDRow], path) -> None:
    fields = list(RD_FIELDS) + ["sequence", "poc", "runtime_s"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for r in rows:
            w.writerow([r.label, r.qp, r.rate_bits, repr(r.quality), r.sequence,
                        "" if r.poc is None else r.poc, "" if r.runtime_s is None else r.runtime_s])


def aggregate_curves(rows: Iterable[RDRow]) -> dict[str, list[RDPoint]]:
    """Per label, one point per qp: summed rate and mean finite quality."""
    acc: dict[str, dict[int, list[RDRow]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        acc[r.label][r.qp].append(r)
    curves = {}
    for label, by_qp in acc.items():
        pts = []
        for qp in sorted(by_qp):
            group = by_qp[qp]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                q = mean_psnr(g.quality for g in group)
            pts.append(RDPoint(sum(g.rate_bits for g in group), q))
        curves[label] = pts
    return curves


def run_records(rows: Sequence[RDRow], prop: str, ref: str) -> list[RunRecord]:
    """Pair per-(sequence, qp) averages of two labels into RunRecords."""
    def cells(label):
        acc = defaultdict(list)
        for r in rows:
            if r.label == label:
                acc[(r.sequence, r.qp)].append(r)
        return acc
    a, b = cells(prop), cells(ref)
    out = []
    for key in sorted(set(a) | set(b)):
        if key not in a or key not in b:
            raise ContractError(f"labels {prop!r}/{ref!r}: missing grid cell {key}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pa, pb = mean_psnr(r.quality for r in a[key]), mean_psnr(r.quality for r in b[key])
        ta = sum(r.runtime_s or 0.0 for r in a[key]) or 1.0
        tb = sum(r.runtime_s or 0.0 for r in b[key]) or 1.0
        out.append(RunRecord(key[0], key[1], pa, pb, ta, tb))
    return out
