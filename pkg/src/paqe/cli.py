"""Command-line front end.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

from .codec import EncoderConfig
from .codec.artifacts import ArtifactPaths, read_rates, write_artifacts
from .coding_meta import read_meta
from .errors import ContractError, PaqeError
from .frame_io import read_raw_video, write_raw_video
from .ilf_sim import (FIXED_MODES, IlfConfig, IlfMode, encode_with_ilf, run_ilf_sweep, sweep_rd_rows,
                      write_decisions, write_sweep_decisions)
from .metrics import (RDRow, aggregate_curves, bd_rate, delta_psnr, psnr, read_rd_csv, rt_ratio, run_records,
                      write_rd_csv)
from .models import MODEL_FILES, ModelTriple
from .nn import NetConfig, DESK_NET, PAPER_NET
from .qe_pipeline import enhance_frame420
from .synth import synth_clip
from .training import DEFAULT_QPS, PROFILES, SampleStore, TrainSchedule, generate_dataset, load_dataset, train_triple

log = logging.getLogger("paqe")

NETS = {"paper": PAPER_NET, "desk": DESK_NET}


class UsageError(Exception):
    """Bad flags or config values; maps to exit code 2."""


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise UsageError(f"config {path}: {exc.strerror}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path}: top level must be an object")
    unknown = set(cfg) - {"encoder", "train", "ilf", "models", "qps", "width", "height", "profile"}
    if unknown:
        raise UsageError(f"config {path}: unknown section(s) {', '.join(sorted(unknown))}")
    return cfg


def _pick(args, cfg: dict, name: str, default=None):
    """Command-line value if given, else config file value, else default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    return cfg.get(name, default)


def _encoder_config(args, cfg: dict, base_qp=None) -> EncoderConfig:
    enc = dict(cfg.get("encoder", {}))
    overrides = {"base_qp": base_qp if base_qp is not None else getattr(args, "qp", None),
                 "gop_size": getattr(args, "gop", None),
                 "intra_period": getattr(args, "intra_period", None),
                 "block_size": getattr(args, "block_size", None),
                 "search_range": getattr(args, "search_range", None)}
    enc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return EncoderConfig(**enc)
    except TypeError as exc:
        raise UsageError(f"encoder config: {exc}") from None
    except ContractError as exc:
        raise UsageError(f"encoder config: {exc}") from None


def _dims(args, cfg):
    w, h = _pick(args, cfg, "width"), _pick(args, cfg, "height")
    if w is None or h is None:
        raise UsageError("frame dimensions are required (--w/--h or width/height in the config)")
    if w <= 0 or h <= 0 or w % 2 or h % 2:
        raise UsageError(f"dimensions must be positive and even, got {w}x{h}")
    return int(w), int(h)


def _qps(args, cfg):
    qps = _pick(args, cfg, "qps", list(DEFAULT_QPS))
    if not qps or any(not 1 <= int(q) <= 63 for q in qps):
        raise UsageError(f"qps must lie in [1, 63], got {qps}")
    return [int(q) for q in qps]


def _echo(command: str, effective: dict) -> None:
    log.info("%s: effective config %s", command, json.dumps(effective, sort_keys=True))


def _models(path) -> ModelTriple:
    if path is None:
        raise UsageError("--models is required")
    return ModelTriple.load(path)


def cmd_synth(args, cfg):
    w, h = _dims(args, cfg)
    frames = synth_clip(w, h, args.frames, seed=args.seed, noise=args.noise, static=args.static)
    _echo("synth", {"width": w, "height": h, "frames": args.frames, "seed": args.seed, "out": args.out})
    n = write_raw_video(frames, args.out)
    log.info("wrote %d bytes to %s", n, args.out)


def cmd_encode(args, cfg):
    w, h = _dims(args, cfg)
    enc = _encoder_config(args, cfg)
    mode = IlfMode.parse(args.ilf_mode or cfg.get("ilf", {}).get("mode", "ref"))
    models_dir = _pick(args, cfg, "models")
    if mode is not IlfMode.REF and models_dir is None:
        raise UsageError(f"--ilf-mode {mode.value} needs --models")
    prefix = Path(args.out) if args.out else Path(args.input).with_suffix("")
    _echo("encode", {"input": args.input, "width": w, "height": h, "encoder": enc.to_dict(),
                     "ilf_mode": mode.value, "models": models_dir, "out": str(prefix)})
    frames = read_raw_video(args.input, w, h)
    ilf = IlfConfig(mode, _models(models_dir) if mode is not IlfMode.REF else None)
    res = encode_with_ilf(frames, enc, ilf)
    paths = write_artifacts(res.encode, prefix)
    if mode is not IlfMode.REF:
        write_decisions(res.decisions, paths.decisions)
    log.info("encoded %d frames, %d bits", len(frames), res.encode.total_bits)


def _split_videos(store, val_fraction: float):
    videos = sorted({e.video for e in store.entries})
    n_val = max(1, int(round(len(videos) * val_fraction))) if len(videos) > 1 else 0
    val_ids = set(videos[len(videos) - n_val:])
    train = SampleStore([e for e in store.entries if e.video not in val_ids])
    val = SampleStore([e for e in store.entries if e.video in val_ids]) if val_ids else train
    return train, val


def cmd_dataset(args, cfg):
    w, h = _dims(args, cfg)
    qps = _qps(args, cfg)
    enc = _encoder_config(args, cfg, base_qp=qps[0])
    intra_enc = EncoderConfig(**{**enc.to_dict(), "intra_period": 1})
    _echo("dataset", {"inputs": args.inputs, "width": w, "height": h, "qps": qps,
                      "frames_per_video": args.frames_per_video, "seed": args.seed,
                      "encoder": enc.to_dict(), "out": args.out})
    videos = {Path(p).stem: read_raw_video(p, w, h) for p in args.inputs}
    if len(videos) != len(args.inputs):
        raise UsageError("input files must have distinct names")
    ra = generate_dataset(videos, qps, args.frames_per_video, args.seed, enc, args.out)
    ai = generate_dataset(videos, qps, args.frames_per_video, args.seed + 1, intra_enc, args.out,
                          tag="_ai", append_manifest=True)
    log.info("dataset: %d inter-coded and %d intra-coded entries", len(ra.of_type("inter")),
             len(ra.of_type("intra")) + len(ai.of_type("intra")))


def cmd_train(args, cfg):
    profile = _pick(args, cfg, "profile", "desk")
    if profile not in PROFILES:
        raise UsageError(f"unknown profile {profile!r}")
    sched = dict(PROFILES[profile].to_dict())
    sched.update(cfg.get("train", {}))
    for key in ("epochs", "steps_per_epoch", "batch", "patch"):
        if getattr(args, key, None) is not None:
            sched[key] = getattr(args, key)
    sched["seed"] = args.seed
    try:
        schedule = TrainSchedule(**sched)
    except (TypeError, ContractError) as exc:
        raise UsageError(f"train config: {exc}") from None
    net = NETS[profile]
    out = Path(args.out)
    _echo("train", {"dataset": args.dataset, "profile": profile, "schedule": schedule.to_dict(),
                    "net": net.__dict__, "out": str(out)})
    out.mkdir(parents=True, exist_ok=True)
    store = load_dataset(args.dataset)
    train, val = _split_videos(store, args.val_fraction)
    train_triple(train, val, NetConfig(3, net.channels, net.n_blocks), schedule, out)
    log.info("wrote %s to %s", ", ".join(MODEL_FILES.values()), out)


def cmd_enhance(args, cfg):
    w, h = _dims(args, cfg)
    paths = ArtifactPaths(Path(args.prefix))
    models_dir = _pick(args, cfg, "models")
    _echo("enhance", {"prefix": args.prefix, "width": w, "height": h, "models": models_dir,
                      "mode": args.mode, "granularity": args.granularity, "orig": args.orig})
    if args.rd_out and not args.orig:
        raise UsageError("--rd-out needs --orig")
    models = _models(models_dir)
    for name, p in (("recon", paths.recon), ("pred", paths.pred), ("meta", paths.meta)):
        if not p.is_file():
            raise FileNotFoundError(f"missing {name} stream {p}")
    recon = read_raw_video(paths.recon, w, h)
    pred = read_raw_video(paths.pred, w, h)
    metas = {m.poc: m for m in read_meta(paths.meta)}
    if len(recon) != len(pred) or sorted(metas) != list(range(len(recon))):
        raise ContractError("recon, pred and meta streams disagree on the frame count")
    out = []
    times = []
    for c, p in zip(recon, pred):
        t0 = time.perf_counter()
        out.append(enhance_frame420(c, p, metas[c.poc], models, args.granularity))
        times.append(time.perf_counter() - t0)
    target = Path(args.out) if args.out else paths.enhanced
    write_raw_video(out, target)
    if args.orig:
        orig = read_raw_video(args.orig, w, h)
        report = Path(args.report) if args.report else target.with_suffix(".psnr.csv")
        with open(report, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["poc", "psnr_recon_y", "psnr_enhanced_y", "psnr_recon_u", "psnr_enhanced_u",
                         "psnr_recon_v", "psnr_enhanced_v", "runtime_s"])
            for o, c, e, t in zip(orig, recon, out, times):
                vals = []
                for pid in "yuv":
                    vals += [psnr(getattr(c, pid), getattr(o, pid)), psnr(getattr(e, pid), getattr(o, pid))]
                wr.writerow([c.poc] + [f"{v:.6f}" for v in vals] + [f"{t:.6f}"])
        log.info("wrote per-frame PSNR to %s", report)
        if args.rd_out:
            rates = read_rates(paths.rates)
            qp = metas[0].base_qp
            seq = Path(args.orig).stem
            rd = [RDRow("ref", qp, rates[c.poc], psnr(c.y, o.y), seq, c.poc, 0.0) for o, c in zip(orig, recon)]
            rd += [RDRow("pp", qp, rates[c.poc], psnr(e.y, o.y), seq, c.poc, t)
                   for o, c, e, t in zip(orig, recon, out, times)]
            write_rd_csv(rd, args.rd_out)
            log.info("wrote RD rows to %s", args.rd_out)
    log.info("wrote %d enhanced frames to %s", len(out), target)


def cmd_report(args, cfg):
    _echo("report", {"inputs": args.inputs, "anchor": args.anchor, "out": args.out, "plot_data": args.plot_data})
    rows: list[RDRow] = []
    for p in args.inputs:
        rows += read_rd_csv(p)
    curves = aggregate_curves(rows)
    if args.anchor not in curves:
        raise ContractError(f"anchor label {args.anchor!r} not found; labels: {', '.join(sorted(curves))}")
    out_rows = []
    for label in sorted(curves):
        if label == args.anchor:
            continue
        recs = run_records(rows, label, args.anchor)
        out_rows.append([f"{label} vs {args.anchor}", bd_rate(curves[args.anchor], curves[label]),
                         delta_psnr(recs), rt_ratio(recs)])
    with open(args.out, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["pair", "bd_rate_percent", "delta_psnr_db", "rt_ratio"])
        for r in out_rows:
            wr.writerow([r[0], f"{r[1]:.6f}", f"{r[2]:.6f}", f"{r[3]:.6f}"])
            log.info("%s: BD-rate %.3f%%, dPSNR %.4f dB, RT %.3f", *r)
    if args.plot_data:
        with open(args.plot_data, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["label", "rate_bits", "quality"])
            for label in sorted(curves):
                for pt in curves[label]:
                    wr.writerow([label, pt.rate, f"{pt.quality:.6f}"])


def cmd_sweep(args, cfg):
    w, h = _dims(args, cfg)
    qps = _qps(args, cfg)
    enc = _encoder_config(args, cfg, base_qp=qps[0])
    modes = [IlfMode.parse(m) for m in (args.modes or ["ref"] + [m.value for m in FIXED_MODES] + ["adaptive"])]
    models_dir = _pick(args, cfg, "models")
    _echo("sweep", {"input": args.input, "width": w, "height": h, "qps": qps, "modes": [m.value for m in modes],
                    "encoder": enc.to_dict(), "models": models_dir, "out": args.out})
    models = _models(models_dir)
    frames = read_raw_video(args.input, w, h)
    rows, decisions = run_ilf_sweep(frames, enc, models, qps, modes, sequence=Path(args.input).stem)
    write_rd_csv(sweep_rd_rows(rows), args.out)
    write_sweep_decisions(decisions, Path(args.out).with_suffix(".decisions.csv"))
    log.info("wrote %d rows to %s", len(rows), args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="paqe", description="Prediction-aware quality enhancement toolkit")
    ap.add_argument("--config", help="JSON config file; command-line flags override its values")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1, help="worker count (computation is single-process)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def dims(p, required=False):
        p.add_argument("--w", dest="width", type=int, required=required)
        p.add_argument("--h", dest="height", type=int, required=required)

    def encoder_flags(p):
        p.add_argument("--gop", type=int)
        p.add_argument("--intra-period", type=int)
        p.add_argument("--block-size", type=int)
        p.add_argument("--search-range", type=int)

    p = sub.add_parser("synth", help="write a synthetic 10-bit 4:2:0 clip")
    p.add_argument("--out", required=True)
    dims(p)
    p.add_argument("--frames", type=int, default=17)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--static", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="toy-codec encode producing recon/pred/meta/residual sidecars")
    p.add_argument("--in", dest="input", required=True)
    dims(p)
    p.add_argument("--qp", type=int)
    encoder_flags(p)
    p.add_argument("--ilf-mode", choices=[m.value for m in IlfMode])
    p.add_argument("--models")
    p.add_argument("--out", help="output prefix (default: input path without extension)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("dataset", help="encode clips at several qps and write dataset.jsonl")
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    dims(p)
    p.add_argument("--qps", type=int, nargs="+")
    p.add_argument("--frames-per-video", type=int, default=4)
    encoder_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the intra, inter and prediction-unaware models")
    p.add_argument("--dataset", required=True, help="dataset.jsonl manifest")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--epochs", type=int)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="post-process a decoded stream")
    p.add_argument("--prefix", required=True, help="artifact prefix of the encode")
    dims(p)
    p.add_argument("--models")
    p.add_argument("--mode", choices=["pp"], default="pp")
    p.add_argument("--granularity", choices=["block", "frame"], default="block")
    p.add_argument("--orig", help="original clip; enables the per-frame PSNR report")
    p.add_argument("--report", help="PSNR report path (default next to the output)")
    p.add_argument("--rd-out", help="RD CSV rows (labels ref and pp) for the report command")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("report", help="BD-rate, delta PSNR and runtime ratio from RD CSVs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--anchor", default="ref")
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("sweep", help="in-loop enhancement sweep over modes and qps")
    p.add_argument("--in", dest="input", required=True)
    dims(p)
    p.add_argument("--qps", type=int, nargs="+")
    p.add_argument("--modes", nargs="+", choices=[m.value for m in IlfMode])
    encoder_flags(p)
    p.add_argument("--models")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = _load_config(args.config)
        args.func(args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (PaqeError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
