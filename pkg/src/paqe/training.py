"""Training data assembly, patch sampling and the optimisation loop.

Frames come from toy-codec encodes of raw clips. Each selected frame is
stored with its luma recon, prediction, original, QP map and block-type
mask; I-frames feed the intra store and B-frames the inter store.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .codec import EncoderConfig, encode_sequence
from .codec.artifacts import ArtifactPaths, write_artifacts
from .coding_meta import BlockType, build_block_type_mask, build_qp_map, read_meta
from .errors import ContractError, MalformedInputError
from .frame_io import Frame420, frame_byte_size, read_raw_frame, write_raw_video
from .models import ModelTriple
from .nn import Adam, NetConfig, QENetwork, l1_loss
from .qe_pipeline import normalize

log = logging.getLogger(__name__)

DEFAULT_QPS = (22, 27, 32, 37, 42)
N_AUGMENT = 8
SKIP_REJECT_FRACTION = 0.5
MAX_REJECT_DRAWS = 64


@dataclass
class FrameEntry:
    video: str
    qp: int  # base qp of the encode
    poc: int
    coding_type: str  # "intra" or "inter"
    recon: np.ndarray
    pred: np.ndarray
    orig: np.ndarray
    qp_map: np.ndarray
    type_mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.recon.shape


@dataclass
class SampleStore:
    entries: list[FrameEntry] = field(default_factory=list)
    manifest: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def of_type(self, coding_type: str) -> list[FrameEntry]:
        return [e for e in self.entries if e.coding_type == coding_type]

    @property
    def qps(self) -> set[int]:
        return {e.qp for e in self.entries}

    def merged(self, other: "SampleStore") -> "SampleStore":
        return SampleStore(self.entries + other.entries, self.manifest + other.manifest)


def _entry_from(video: str, qp: int, recon: Frame420, pred: Frame420, orig: Frame420, meta) -> FrameEntry:
    h, w = recon.y.shape
    return FrameEntry(
        video=video, qp=qp, poc=recon.poc,
        coding_type="intra" if meta.frame_type == "I" else "inter",
        recon=recon.y.copy(), pred=pred.y.copy(), orig=orig.y.copy(),
        qp_map=build_qp_map(meta, w, h), type_mask=build_block_type_mask(meta, w, h),
    )


def _pick_pocs(rng: np.random.Generator, n_frames: int, k: int, video: str) -> list[int]:
    if n_frames < k:
        warnings.warn(f"video {video!r} has {n_frames} frames, fewer than {k}; using all of them")
        return list(range(n_frames))
    return sorted(int(p) for p in rng.choice(n_frames, size=k, replace=False))


def generate_dataset(videos: Mapping[str, Sequence[Frame420]], qps: Sequence[int] = DEFAULT_QPS,
                     frames_per_video: int = 4, seed: int = 0,
                     config: Optional[EncoderConfig] = None,
                     out_dir: Optional[str | os.PathLike] = None, tag: str = "",
                     append_manifest: bool = False) -> SampleStore:
    """Encode every video at every qp and keep ``frames_per_video`` random frames of each.

    With ``out_dir`` the encodes and originals are written there together
    with a ``dataset.jsonl`` manifest that ``load_dataset`` reads back;
    ``tag`` keeps file names of several encode configurations apart.
    """
    base = config or EncoderConfig()
    rng = np.random.default_rng(seed)
    store = SampleStore()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for video in sorted(videos):
        frames = list(videos[video])
        if not frames:
            raise ContractError(f"video {video!r} has no frames")
        h, w = frames[0].y.shape
        orig_path = None
        if out is not None:
            orig_path = out / f"{video}.orig.yuv"
            write_raw_video(frames, orig_path)
        for qp in qps:
            cfg = EncoderConfig(**{**base.to_dict(), "base_qp": int(qp)})
            result = encode_sequence(frames, cfg)
            by_poc = result.metas_by_poc
            paths = write_artifacts(result, out / f"{video}{tag}_q{qp}") if out is not None else None
            for poc in _pick_pocs(rng, len(frames), frames_per_video, video):
                entry = _entry_from(video, int(qp), result.recon[poc], result.pred[poc], frames[poc], by_poc[poc])
                store.entries.append(entry)
                row = {"video": video, "qp": int(qp), "poc": poc, "coding_type": entry.coding_type,
                       "width": w, "height": h}
                if paths is not None:
                    off = poc * frame_byte_size(w, h)
                    row.update(recon=paths.recon.name, pred=paths.pred.name, meta=paths.meta.name,
                               orig=orig_path.name, offset=off)
                store.manifest.append(row)
    if out is not None:
        write_manifest(store.manifest, out / "dataset.jsonl", append_manifest)
    return store


def write_manifest(rows: Iterable[dict], path, append: bool = False) -> None:
    with open(path, "a" if append else "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_dataset(manifest_path: str | os.PathLike) -> SampleStore:
    """Rebuild a store from ``dataset.jsonl`` and the files next to it."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    store = SampleStore()
    metas_cache: dict[str, dict] = {}
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                w, h, poc = int(row["width"]), int(row["height"]), int(row["poc"])
                names = [row["recon"], row["pred"], row["meta"], row["orig"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedInputError(f"{manifest_path}: line {lineno}: bad manifest entry ({exc})") from None
            missing = [n for n in names if not (root / n).is_file()]
            if missing:
                raise FileNotFoundError(f"{manifest_path}: line {lineno}: missing companion file(s) {', '.join(missing)}")
            if row["offset"] != poc * frame_byte_size(w, h):
                raise MalformedInputError(f"{manifest_path}: line {lineno}: offset does not match poc")
            if row["meta"] not in metas_cache:
                metas_cache[row["meta"]] = {m.poc: m for m in read_meta(root / row["meta"])}
            meta = metas_cache[row["meta"]][poc]
            recon, pred, orig = (read_raw_frame(root / n, w, h, poc) for n in (row["recon"], row["pred"], row["orig"]))
            store.entries.append(_entry_from(row["video"], int(row["qp"]), recon, pred, orig, meta))
            store.manifest.append(row)
    return store


@dataclass
class TrainingSample:
    recon: np.ndarray
    pred: np.ndarray
    qp: np.ndarray
    orig: np.ndarray
    coding_type: str
    variant: int = 0  # dihedral augmentation index in [0, 8)


def dihedral(patch: np.ndarray, variant: int) -> np.ndarray:
    """Variant v: rotate by (v % 4) quarter turns, then mirror horizontally if v >= 4."""
    out = np.rot90(patch, variant % 4)
    if variant >= 4:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def augment_sample(s: TrainingSample, variant: int) -> TrainingSample:
    return TrainingSample(dihedral(s.recon, variant), dihedral(s.pred, variant), dihedral(s.qp, variant),
                          dihedral(s.orig, variant), s.coding_type, variant)


def _crop(entry: FrameEntry, x: int, y: int, size: int) -> TrainingSample:
    win = np.s_[y:y + size, x:x + size]
    return TrainingSample(entry.recon[win], entry.pred[win], entry.qp_map[win], entry.orig[win],
                          entry.coding_type)


def sample_batch(entries: Sequence[FrameEntry], batch: int = 16, patch: int = 64, augment: bool = True,
                 rng: Optional[np.random.Generator] = None, reject_skip: Optional[bool] = None) -> list[TrainingSample]:
    """Uniform random frame and position per sample, plus a random dihedral variant.

    Inter patches that are more than half skip pixels are redrawn (up to a
    bounded number of attempts) unless ``reject_skip`` is False.
    """
    if not entries:
        raise ContractError("cannot sample from an empty store")
    rng = rng or np.random.default_rng(0)
    for e in entries:
        if patch > min(e.shape):
            raise ContractError(f"patch {patch} is larger than frame {e.shape[1]}x{e.shape[0]}")
    out = []
    for _ in range(batch):
        for _attempt in range(MAX_REJECT_DRAWS):
            entry = entries[int(rng.integers(len(entries)))]
            h, w = entry.shape
            y = int(rng.integers(h - patch + 1))
            x = int(rng.integers(w - patch + 1))
            check = reject_skip if reject_skip is not None else entry.coding_type == "inter"
            if not check:
                break
            skip = entry.type_mask[y:y + patch, x:x + patch] == int(BlockType.SKIP)
            if skip.mean() <= SKIP_REJECT_FRACTION:
                break
        sample = _crop(entry, x, y, patch)
        if augment:
            sample = augment_sample(sample, int(rng.integers(N_AUGMENT)))
        out.append(sample)
    return out


def stack_batch(samples: Sequence[TrainingSample], aware: bool) -> tuple[np.ndarray, np.ndarray]:
    """Network input (B, C, H, W) in [P, C, Q] or [C, Q] order and target (B, 1, H, W)."""
    xs, ys = [], []
    for s in samples:
        chans = [normalize(s.recon), s.qp.astype(np.float32)]
        if aware:
            chans.insert(0, normalize(s.pred))
        xs.append(np.stack(chans))
        ys.append(normalize(s.orig)[None])
    return np.stack(xs), np.stack(ys)


@dataclass(frozen=True)
class TrainSchedule:
    initial_lr: float = 1e-5
    decay: float = 0.5
    decay_every: int = 100
    epochs: int = 500
    batch: int = 16
    patch: int = 64
    steps_per_epoch: Optional[int] = None  # None: one pass worth of patches over the store
    seed: int = 0

    def __post_init__(self):
        if self.batch < 2:
            raise ContractError("batch size must be >= 2 (batch normalization)")
        if self.epochs < 1 or self.decay_every < 1 or self.patch < 1:
            raise ContractError("epochs, decay_every and patch must be positive")
        if not self.initial_lr > 0:
            raise ContractError("initial_lr must be positive")

    def lr(self, epoch: int) -> float:
        return self.initial_lr * self.decay ** (epoch // self.decay_every)

    def steps_for(self, entries: Sequence[FrameEntry]) -> int:
        if self.steps_per_epoch is not None:
            return self.steps_per_epoch
        pixels = sum(e.shape[0] * e.shape[1] for e in entries)
        return max(1, pixels // (self.patch * self.patch * self.batch))

    def to_dict(self) -> dict:
        return dict(self.__dict__)


PAPER_SCHEDULE = TrainSchedule()
# desk preset: same shape of schedule, compressed so CPU training takes minutes
DESK_SCHEDULE = TrainSchedule(initial_lr=1e-3, decay=0.5, decay_every=10, epochs=50, batch=16,
                              patch=32, steps_per_epoch=12)

PROFILES = {"paper": PAPER_SCHEDULE, "desk": DESK_SCHEDULE}


def validation_set(entries: Sequence[FrameEntry], n: int = 50, crop: int = 128) -> list[TrainingSample]:
    """Centered crops (at most ``crop`` square) of the first ``n`` entries."""
    if not entries:
        raise ContractError("validation set needs at least one frame")
    out = []
    for e in entries[:n]:
        h, w = e.shape
        size = min(crop, h, w)
        out.append(_crop(e, (w - size) // 2, (h - size) // 2, size))
    return out


def evaluate_l1(net: QENetwork, samples: Sequence[TrainingSample]) -> float:
    if not samples:
        raise ContractError("empty validation set")
    aware = net.in_channels == 3
    total, count = 0.0, 0
    by_shape: dict[tuple, list] = {}
    for s in samples:
        by_shape.setdefault(s.recon.shape, []).append(s)
    for group in by_shape.values():
        x, y = stack_batch(group, aware)
        out = net.forward(x, "infer")
        total += float(np.abs(out.astype(np.float64) - y).sum())
        count += y.size
    return total / count


@dataclass
class TrainResult:
    net: QENetwork
    curve: list[dict]
    best_epoch: int
    best_val: float


def train_model(entries: Sequence[FrameEntry], net_config: NetConfig, schedule: TrainSchedule,
                val: Sequence[TrainingSample], init: Optional[QENetwork] = None,
                reject_skip: Optional[bool] = None) -> TrainResult:
    """Adam on L1; returns the parameters of the epoch with the lowest validation L1."""
    if not entries:
        raise ContractError("cannot train on an empty store")
    if schedule.batch < 2:
        raise ContractError("batch size must be >= 2 (batch normalization)")
    rng = np.random.default_rng(schedule.seed)
    net = init.copy() if init is not None else QENetwork(net_config, seed=schedule.seed, identity=True)
    aware = net.in_channels == 3
    params = [p for _, p in net.named_parameters()]
    grads = [g for _, g in net.named_grads()]
    opt = Adam(params, lr=schedule.initial_lr)
    steps = schedule.steps_for(entries)
    best, best_val, best_epoch = None, np.inf, -1
    curve = []
    for epoch in range(schedule.epochs):
        lr = schedule.lr(epoch)
        losses = []
        for _ in range(steps):
            batch = sample_batch(entries, schedule.batch, schedule.patch, True, rng, reject_skip)
            x, y = stack_batch(batch, aware)
            net.zero_grad()
            out = net.forward(x, "train")
            loss, g = l1_loss(out, y)
            net.backward(g)
            opt.step(grads, lr)
            losses.append(loss)
        val_l1 = evaluate_l1(net, val)
        curve.append({"epoch": epoch, "train_l1": float(np.mean(losses)), "val_l1": val_l1, "lr": lr})
        log.debug("epoch %d train %.6f val %.6f lr %.3g", epoch, curve[-1]["train_l1"], val_l1, lr)
        if val_l1 < best_val:
            best, best_val, best_epoch = net.copy(), val_l1, epoch
    return TrainResult(best, curve, best_epoch, best_val)


def write_loss_curve(curve: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_l1", "val_l1", "lr"])
        w.writeheader()
        for row in curve:
            w.writerow({k: (f"{row[k]:.9g}" if isinstance(row[k], float) else row[k]) for k in w.fieldnames})


def train_triple(store: SampleStore, val_store: SampleStore, net_config: NetConfig,
                 schedule: TrainSchedule, out_dir: Optional[str | os.PathLike] = None) -> tuple[ModelTriple, dict]:
    """Intra and inter models on their stores, the unaware model on both mixed."""
    cfg3 = NetConfig(3, net_config.channels, net_config.n_blocks)
    cfg2 = NetConfig(2, net_config.channels, net_config.n_blocks)
    jobs = {
        "intra": (store.of_type("intra"), val_store.of_type("intra"), cfg3),
        "inter": (store.of_type("inter"), val_store.of_type("inter"), cfg3),
        "unaware": (store.entries, val_store.entries, cfg2),
    }
    nets, results = {}, {}
    for name, (train_entries, val_entries, cfg) in jobs.items():
        if not train_entries:
            raise ContractError(f"no {name} frames in the training store")
        val = validation_set(val_entries or train_entries)
        res = train_model(train_entries, cfg, schedule, val, reject_skip=(name == "inter"))
        nets[name], results[name] = res.net, res
        log.info("%s model: best epoch %d, val L1 %.6f", name, res.best_epoch, res.best_val)
    triple = ModelTriple(nets["intra"], nets["inter"], nets["unaware"])
    if out_dir is not None:
        out = Path(out_dir)
        triple.save(out)
        for name, res in results.items():
            write_loss_curve(res.curve, out / f"{name}.loss.csv")
    return triple, results


__all__ = [
    "DEFAULT_QPS", "FrameEntry", "SampleStore", "generate_dataset", "load_dataset", "write_manifest",
    "TrainingSample", "dihedral", "augment_sample", "sample_batch", "stack_batch", "TrainSchedule",
    "PAPER_SCHEDULE", "DESK_SCHEDULE", "PROFILES", "validation_set", "evaluate_l1", "TrainResult",
    "train_model", "write_loss_curve", "train_triple", "ModelTriple", "ArtifactPaths",
]
