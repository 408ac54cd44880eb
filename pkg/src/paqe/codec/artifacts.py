"""On-disk artifact set of one encode: recon, pred, meta, residual and rates."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

from ..coding_meta import read_meta, write_meta
from ..frame_io import read_raw_video, write_raw_video
from .encoder import EncodeResult


@dataclass(frozen=True)
class ArtifactPaths:
    prefix: Path

    def _p(self, suffix: str) -> Path:
        return self.prefix.with_name(self.prefix.name + suffix)

    @property
    def recon(self) -> Path:
        return self._p(".recon.yuv")

    @property
    def pred(self) -> Path:
        return self._p(".pred.yuv")

    @property
    def meta(self) -> Path:
        return self._p(".meta.jsonl")

    @property
    def residual(self) -> Path:
        return self._p(".residual.bin")

    @property
    def rates(self) -> Path:
        return self._p(".rates.csv")

    @property
    def decisions(self) -> Path:
        return self._p(".decisions.csv")

    @property
    def enhanced(self) -> Path:
        return self._p(".enhanced.yuv")


def write_rates(rates, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["poc", "bits"])
        for poc, bits in enumerate(rates):
            w.writerow([poc, bits])


def read_rates(path) -> list[int]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [int(r["bits"]) for r in sorted(rows, key=lambda r: int(r["poc"]))]


def write_artifacts(result: EncodeResult, prefix: str | os.PathLike) -> ArtifactPaths:
    paths = ArtifactPaths(Path(prefix))
    write_raw_video(result.recon, paths.recon)
    write_raw_video(result.pred, paths.pred)
    write_meta(result.metas, paths.meta)
    paths.residual.write_bytes(result.residual)
    write_rates(result.rates, paths.rates)
    return paths


def read_artifacts(prefix: str | os.PathLike, width: int, height: int) -> EncodeResult:
    paths = ArtifactPaths(Path(prefix))
    return EncodeResult(
        recon=read_raw_video(paths.recon, width, height),
        pred=read_raw_video(paths.pred, width, height),
        metas=read_meta(paths.meta),
        residual=paths.residual.read_bytes(),
        rates=read_rates(paths.rates),
    )
