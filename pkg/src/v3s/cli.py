"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure. Every command writes its outputs through temporary
paths, so a failed run leaves no partial artifacts under the final names.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import evalkit
from .errors import CatalogMismatch, DataError, GradientCheckFailed, UsageError, V3SError
from .fileio import (Checkpoint, RunConfig, atomic_directory, atomic_write_text, load_checkpoint,
                     load_config, read_clip, read_manifest, save_checkpoint, write_clip, write_manifest)
from .pipeline import corpus_scenes, embed, fit_probe, pooled_arrays, predict
from .pretext import GeometryConfig, build_dataset, transform_clip
from .probe import gradient_check
from .synthgen import render
from .temporal import TemporalSpec
from .warp import SpatialSpec

RECALL_KS = (1, 5, 10, 20, 50)
GRADCHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)
    return "".join("\t".join(cell(v) for v in row) + "\n" for row in [header, *rows])


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "stride_literal", False):
        cfg.stride_literal = True
    return cfg


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    cfg = _run_config(args)
    corpus = cfg.corpus()
    if args.videos is not None:
        corpus = type(corpus).from_dict({**corpus.to_dict(), "n_videos": args.videos})
    scenes = corpus_scenes(corpus, cfg.seed, args.split)
    with atomic_directory(args.out) as tmp:
        (tmp / "videos").mkdir()
        records = []
        for vid, scene in scenes.items():
            rel = f"videos/{vid}.v3sc"
            write_clip(tmp / rel, render(scene))
            records.append({"id": vid, "path": rel, "scene": scene.to_dict(), "seed": cfg.seed, "split": args.split})
        write_manifest(tmp / "videos.jsonl", records)
    print(f"wrote {len(records)} videos to {args.out}")
    return 0


def _load_videos(directory) -> dict[str, np.ndarray]:
    directory = Path(directory)
    records = read_manifest(directory / "videos.jsonl")
    return {r["id"]: read_clip(directory / r["path"]) for r in records}


def cmd_transform(args) -> int:
    cfg = _run_config(args)
    video = read_clip(args.input)
    try:
        spatial = SpatialSpec.parse(args.spatial)
        temporal = TemporalSpec.parse(args.temporal, cfg.clip_len, cfg.stage_len_1, cfg.stage_len_2)
        crop = tuple(int(v) for v in args.crop.split(",")) if args.crop else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if crop is not None and len(crop) != 2:
        raise UsageError("--crop expects x,y")
    geometry = cfg.geometry()
    if args.no_crop:
        geometry = GeometryConfig(cfg.resize_to, cfg.resize_to, cfg.stride_literal)
    clip, info = transform_clip(video, spatial, temporal, args.start, geometry, crop_xy=crop)
    write_clip(args.out, clip)
    print(json.dumps({"spatial": spatial.name, "temporal": temporal.name, **info, "shape": list(clip.shape)}))
    return 0


def cmd_make_dataset(args) -> int:
    cfg = _run_config(args)
    videos = _load_videos(args.videos)
    catalog = cfg.catalog()
    n = cfg.n_samples if args.samples is None else args.samples
    samples = build_dataset(videos, n, cfg.seed, catalog, cfg.geometry())
    chash = catalog.hash()
    with atomic_directory(args.out) as tmp:
        (tmp / "clips").mkdir()
        records = []
        for i, s in enumerate(samples):
            sid = f"s{i:06d}"
            rel = f"clips/{sid}.v3sc"
            write_clip(tmp / rel, s.clip)
            records.append({"id": sid, "path": rel, "spatial_class": s.labels.spatial_class,
                            "temporal_class": s.labels.temporal_class, "catalog": chash, **s.provenance})
        write_manifest(tmp / "manifest.jsonl", records)
        atomic_write_text(tmp / "catalog.json", json.dumps(catalog.to_dict(), indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(records)} samples to {args.out} (catalog {chash})")
    return 0


def _load_dataset(directory, catalog_hash: Optional[str] = None):
    directory = Path(directory)
    records = read_manifest(directory / "manifest.jsonl")
    if not records:
        raise DataError(f"{directory} holds no samples")
    found = records[0].get("catalog")
    if catalog_hash is not None and found != catalog_hash:
        raise CatalogMismatch(f"dataset {directory} uses catalog {found}, expected {catalog_hash}")
    clips = [read_clip(directory / r["path"]) for r in records]
    ys = np.array([r["spatial_class"] for r in records], dtype=np.int64)
    yt = np.array([r["temporal_class"] for r in records], dtype=np.int64)
    return clips, ys, yt


def cmd_train_probe(args) -> int:
    cfg = _run_config(args)
    catalog = cfg.catalog()
    clips, ys, yt = _load_dataset(args.dataset, catalog.hash())
    x = pooled_arrays(clips, cfg.pool_grid)
    ckpt, history = fit_probe(x, ys, yt, cfg, catalog.hash())
    ckpt.meta = {"seed": cfg.seed, "samples": len(clips), "epochs": cfg.epochs}
    rows = [(h.epoch, h.loss, h.loss_spatial, h.loss_temporal, h.acc_spatial, h.acc_temporal) for h in history]
    with atomic_directory(args.out) as tmp:
        save_checkpoint(tmp / "probe.ckpt", ckpt)
        atomic_write_text(tmp / "history.tsv", _table(
            ("epoch", "loss", "loss_spatial", "loss_temporal", "acc_spatial", "acc_temporal"), rows))
    last = history[-1]
    print(f"trained {cfg.epochs} epochs: loss {last.loss:.4f}, "
          f"train acc spatial {last.acc_spatial:.3f} temporal {last.acc_temporal:.3f}")
    return 0


def cmd_gradcheck(args) -> int:
    errors = gradient_check(n_configs=args.configs, seed=args.seed if args.seed is not None else 0)
    worst = max(errors)
    print(f"max relative error {worst:.3e} over {len(errors)} configurations")
    if worst >= GRADCHECK_TOLERANCE:
        raise GradientCheckFailed(f"max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:g}")
    return 0


def _checkpoint_for(args, cfg: RunConfig) -> Checkpoint:
    return load_checkpoint(args.checkpoint, cfg.catalog())


def _labels(kind: str, ys, yt, n_temporal: int):
    if kind == "spatial":
        return ys
    if kind == "temporal":
        return yt
    return ys * n_temporal + yt


def cmd_eval_retrieval(args) -> int:
    cfg = _run_config(args)
    catalog = cfg.catalog()
    ckpt = _checkpoint_for(args, cfg)
    g_clips, g_ys, g_yt = _load_dataset(args.gallery, catalog.hash())
    q_clips, q_ys, q_yt = _load_dataset(args.queries, catalog.hash())
    g_feat = embed(ckpt, pooled_arrays(g_clips, ckpt.pool_grid))
    q_feat = embed(ckpt, pooled_arrays(q_clips, ckpt.pool_grid))
    depth = min(max(RECALL_KS), len(g_feat))
    hits = evalkit.topk_retrieval(q_feat, g_feat, depth)
    rows = []
    for kind in ("spatial", "temporal", "joint"):
        ql = _labels(kind, q_ys, q_yt, catalog.n_temporal)
        gl = _labels(kind, g_ys, g_yt, catalog.n_temporal)
        row = [kind] + [evalkit.recall_at_k(hits, ql, gl, k) if k <= depth else "n/a" for k in RECALL_KS]
        row.append(evalkit.chance_recall_at_1(ql, gl))
        rows.append(row)
    text = _table(["labels"] + [f"recall@{k}" for k in RECALL_KS] + ["chance@1"], rows)
    if args.out:
        atomic_write_text(args.out, text)
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    cfg = _run_config(args)
    catalog = cfg.catalog()
    ckpt = _checkpoint_for(args, cfg)
    clips, ys, yt = _load_dataset(args.dataset, catalog.hash())
    ps, pt = predict(ckpt, pooled_arrays(clips, ckpt.pool_grid))
    cm_s = evalkit.confusion_matrix(ps, ys, catalog.n_spatial)
    cm_t = evalkit.confusion_matrix(pt, yt, catalog.n_temporal)
    lines = [f"samples\t{len(clips)}",
             f"spatial_accuracy\t{evalkit.accuracy(cm_s):.4f}",
             f"temporal_accuracy\t{evalkit.accuracy(cm_t):.4f}", ""]
    for title, cm, classes in (("spatial", cm_s, catalog.spatial_classes),
                               ("temporal", cm_t, catalog.temporal_classes)):
        lines.append(f"# {title} confusion (rows true, columns predicted)")
        lines.append("\t".join(["class"] + [str(i) for i in range(len(classes))]))
        for i, spec in enumerate(classes):
            lines.append("\t".join([f"{i}:{spec.name}"] + [str(int(v)) for v in cm[i]]))
        lines.append("")
    text = "\n".join(lines)
    if args.out:
        atomic_write_text(args.out, text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="v3s", description="Spatial and temporal pretext transformations for video clips.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text, seed=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="run config file (key = JSON value lines)")
        if seed:
            p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--stride-literal", action="store_true",
                       help="use stride s-1 for speed s instead of stride s")
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "render a synthetic video corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", default="train", help="corpus name, also part of the scene seed")
    p.add_argument("--videos", type=int, help="number of videos (overrides the config)")

    p = add("transform", cmd_transform, "apply one spatial and one temporal transformation to a clip file")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--spatial", default="identity", help="identity | scale:a,b | projection:c,side")
    p.add_argument("--temporal", default="scale:1", help="scale:s | projection:s1,s2")
    p.add_argument("--start", type=int, default=0, help="first source frame")
    p.add_argument("--crop", help="crop offset x,y (default: centred)")
    p.add_argument("--no-crop", action="store_true", help="keep the whole resized frame")

    p = add("make-dataset", cmd_make_dataset, "draw a labeled pretext dataset from a corpus")
    p.add_argument("--videos", type=Path, required=True, help="directory written by synth")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--samples", type=int, help="number of samples (overrides the config)")

    p = add("train-probe", cmd_train_probe, "train the two-head probe on a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add("gradcheck", cmd_gradcheck, "compare analytic and finite-difference probe gradients")
    p.add_argument("--configs", type=int, default=20)

    p = add("eval-retrieval", cmd_eval_retrieval, "nearest-neighbour retrieval on probe features")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--gallery", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--out", type=Path)

    p = add("report", cmd_report, "per-head accuracy and confusion matrices")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except V3SError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error [data]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [data]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
