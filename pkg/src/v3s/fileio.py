"""On-disk formats: clip files, JSONL manifests, run configs and checkpoints.

Clip file layout (all little-endian)::

    b"V3SC" | u32 version | u16 T | u16 H | u16 W | u16 C | f32 samples

Samples are stored frame-major then row-major, i.e. the C-order bytes of a
``(T, H, W, C)`` array.

Checkpoint layout::

    b"V3SP" | u32 version | u32 header length | JSON header | f64 arrays

The JSON header lists array names and shapes in storage order. Nothing
time- or host-dependent is written, so equal inputs give equal bytes.

Every writer goes through a temporary sibling path and ``os.replace`` so a
crash never leaves a half-written file under the final name.
"""
from __future__ import annotations

import contextlib
import json
import os
import shutil
import struct
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import (BadMagic, CatalogMismatch, ClipFormatError, ConfigError, DataError,
                     OutOfRangeSample, TruncatedFile, UnsupportedVersion)
from .pretext import (PROJECTION_FACTORS, PROJECTION_SIDES, SCALE_FACTORS, SPEED_PATTERNS, SPEEDS,
                      GeometryConfig, TaskCatalog, make_catalog)
from .probe import POOL_GRID, PARAM_NAMES, ProbeModel, Standardizer, TrainConfig
from .synthgen import CorpusConfig
from .temporal import CLIP_LEN, STAGE_LEN

CLIP_MAGIC = b"V3SC"
CLIP_VERSION = 1
_CLIP_HEADER = struct.Struct("<4sI4H")

CKPT_MAGIC = b"V3SP"
CKPT_VERSION = 1
_CKPT_PREFIX = struct.Struct("<4sII")


# ---------------------------------------------------------------- atomic writes

@contextlib.contextmanager
def _temp_sibling(path: Path, directory: bool = False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if directory:
        tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent))
    else:
        fd, name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        os.close(fd)
        tmp = Path(name)
    try:
        yield tmp
    except BaseException:
        if tmp.is_dir():
            shutil.rmtree(tmp, ignore_errors=True)
        else:
            tmp.unlink(missing_ok=True)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    with _temp_sibling(path) as tmp:
        tmp.write_bytes(data)
        os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


@contextlib.contextmanager
def atomic_directory(path):
    """Yield a temporary directory that replaces ``path`` on clean exit."""
    path = Path(path)
    with _temp_sibling(path, directory=True) as tmp:
        yield tmp
        if path.exists():
            old = path.with_name(f".{path.name}.old")
            shutil.rmtree(old, ignore_errors=True)
            os.replace(path, old)
            os.replace(tmp, path)
            shutil.rmtree(old, ignore_errors=True)
        else:
            os.replace(tmp, path)


# ---------------------------------------------------------------- clip files

def encode_clip(clip: np.ndarray) -> bytes:
    clip = np.asarray(clip)
    if clip.ndim != 4:
        raise ClipFormatError(f"clip must be (T, H, W, C), got shape {clip.shape}")
    if any(n > 0xFFFF for n in clip.shape):
        raise ClipFormatError(f"clip dimensions {clip.shape} exceed the u16 header fields")
    data = clip.astype("<f4")
    if not np.all((data >= 0.0) & (data <= 1.0)):
        raise OutOfRangeSample("clip samples must lie in [0, 1]")
    return _CLIP_HEADER.pack(CLIP_MAGIC, CLIP_VERSION, *clip.shape) + data.tobytes(order="C")


def decode_clip(blob: bytes, path=None) -> np.ndarray:
    if len(blob) < _CLIP_HEADER.size:
        raise TruncatedFile(_CLIP_HEADER.size, len(blob), path)
    magic, version, t, h, w, c = _CLIP_HEADER.unpack_from(blob)
    if magic != CLIP_MAGIC:
        raise BadMagic(f"expected magic {CLIP_MAGIC!r}, found {magic!r}" + (f" in {path}" if path else ""))
    if version != CLIP_VERSION:
        raise UnsupportedVersion(f"clip format version {version} is not supported")
    expected = t * h * w * c * 4
    actual = len(blob) - _CLIP_HEADER.size
    if actual != expected:
        raise TruncatedFile(expected, actual, path)
    clip = np.frombuffer(blob, dtype="<f4", offset=_CLIP_HEADER.size).reshape(t, h, w, c)
    if not np.all((clip >= 0.0) & (clip <= 1.0)):
        raise OutOfRangeSample(f"sample outside [0, 1]" + (f" in {path}" if path else ""))
    return clip.astype(np.float32)


def write_clip(path, clip: np.ndarray) -> None:
    atomic_write_bytes(path, encode_clip(clip))


def read_clip(path) -> np.ndarray:
    return decode_clip(Path(path).read_bytes(), path)


# ---------------------------------------------------------------- manifests

def dump_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)


def write_manifest(path, records: list[dict]) -> None:
    ids = [r["id"] for r in records]
    if len(set(ids)) != len(ids):
        raise DataError("manifest ids must be unique")
    hashes = {r["catalog"] for r in records if "catalog" in r}
    if len(hashes) > 1:
        raise CatalogMismatch(f"manifest mixes catalog hashes {sorted(hashes)}")
    atomic_write_text(path, dump_jsonl(records))


def read_manifest(path) -> list[dict]:
    records = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{n}: bad manifest line ({exc.msg})") from None
    ids = [r.get("id") for r in records]
    if None in ids or len(set(ids)) != len(ids):
        raise DataError(f"{path}: manifest ids missing or duplicated")
    hashes = {r["catalog"] for r in records if "catalog" in r}
    if len(hashes) > 1:
        raise CatalogMismatch(f"{path}: manifest mixes catalog hashes {sorted(hashes)}")
    return records


# ---------------------------------------------------------------- run config

@dataclass
class RunConfig:
    """Every knob of a run. Defaults reproduce the reference settings."""
    seed: int = 0
    # class catalog
    scale_factors: list = field(default_factory=lambda: [list(p) for p in SCALE_FACTORS])
    projection_factors: list = field(default_factory=lambda: list(PROJECTION_FACTORS))
    projection_sides: list = field(default_factory=lambda: list(PROJECTION_SIDES))
    speeds: list = field(default_factory=lambda: list(SPEEDS))
    speed_patterns: list = field(default_factory=lambda: [list(p) for p in SPEED_PATTERNS])
    include_identity: bool = True
    clip_len: int = CLIP_LEN
    stage_len_1: int = STAGE_LEN
    stage_len_2: int = STAGE_LEN
    # preprocessing
    resize_to: int = 64
    crop_size: int = 32
    stride_literal: bool = False
    # synthetic corpus
    n_videos: int = 200
    frame_size: int = 64
    n_frames: int = 72
    object_size: list = field(default_factory=lambda: [10.0, 44.0])
    object_speed: float = 0.75
    foreground: float = 1.0
    background: float = 0.0
    gradient: list = field(default_factory=lambda: [0.22, 0.22])
    noise: float = 0.0
    channels: int = 1
    headings: int = 1
    # dataset and probe
    n_samples: int = 2000
    pool_grid: list = field(default_factory=lambda: list(POOL_GRID))
    hidden: int = 128
    standardize: bool = True
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 60
    weight_decay: float = 0.0

    def catalog(self) -> TaskCatalog:
        return make_catalog(
            scales=[tuple(p) for p in self.scale_factors], projections=self.projection_factors,
            sides=self.projection_sides, speeds=self.speeds,
            patterns=[tuple(p) for p in self.speed_patterns], include_identity=self.include_identity,
            clip_len=self.clip_len, stage_lens=(self.stage_len_1, self.stage_len_2))

    def geometry(self) -> GeometryConfig:
        return GeometryConfig(self.resize_to, self.crop_size, self.stride_literal)

    def corpus(self) -> CorpusConfig:
        size = self.object_size
        return CorpusConfig(
            n_videos=self.n_videos, frame_size=self.frame_size, n_frames=self.n_frames,
            object_size=float(size) if np.isscalar(size) else tuple(float(v) for v in size),
            object_speed=self.object_speed, foreground=self.foreground, background=self.background,
            gradient=tuple(self.gradient), noise=self.noise, channels=self.channels, headings=self.headings)

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(lr=self.lr, momentum=self.momentum, batch_size=self.batch_size,
                           epochs=self.epochs, seed=self.seed if seed is None else seed,
                           weight_decay=self.weight_decay)

    def dumps(self) -> str:
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in asdict(self).items())


_CONFIG_TYPES = {f.name: f for f in fields(RunConfig)}


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse ``key = value`` lines; values are JSON, ``#`` starts a comment.

    Unknown keys and values of the wrong JSON type are rejected.
    """
    values = asdict(base or RunConfig())
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {n}: expected 'key = value', got {raw!r}")
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"line {n}: unknown config key {key!r}")
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError:
            raise ConfigError(f"line {n}: value for {key!r} is not valid JSON: {value.strip()!r}") from None
        values[key] = _check_type(key, parsed, values[key], n)
    try:
        cfg = RunConfig(**values)
        cfg.catalog()
        cfg.geometry()
        cfg.train_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return cfg


def _check_type(key, value, default, line):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list) or (key == "object_size" and isinstance(value, (int, float)))
    else:
        ok = True
    if not ok:
        raise ConfigError(f"line {line}: {key!r} expects {type(default).__name__}, got {value!r}")
    return value


def load_config(path: Optional[os.PathLike] = None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# ---------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    model: ProbeModel
    standardizer: Standardizer
    catalog_hash: str
    pool_grid: tuple[int, int, int]
    meta: dict = field(default_factory=dict)

    def check_catalog(self, catalog: TaskCatalog) -> None:
        if catalog.hash() != self.catalog_hash:
            raise CatalogMismatch(
                f"checkpoint was trained on catalog {self.catalog_hash}, current catalog is {catalog.hash()}")
        if (catalog.n_spatial, catalog.n_temporal) != (self.model.n_spatial, self.model.n_temporal):
            raise CatalogMismatch("checkpoint head sizes do not match the catalog")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    arrays = [(name, ckpt.model.params[name]) for name in PARAM_NAMES]
    arrays += [("input_mean", ckpt.standardizer.mean), ("input_scale", ckpt.standardizer.scale)]
    m = ckpt.model
    header = {
        "catalog": ckpt.catalog_hash,
        "dims": {"input": m.input_dim, "hidden": m.hidden, "spatial": m.n_spatial, "temporal": m.n_temporal},
        "pool_grid": list(ckpt.pool_grid),
        "arrays": [[name, list(np.shape(a))] for name, a in arrays],
        "meta": ckpt.meta,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return _CKPT_PREFIX.pack(CKPT_MAGIC, CKPT_VERSION, len(head)) + head + body


def decode_checkpoint(blob: bytes, path=None) -> Checkpoint:
    if len(blob) < _CKPT_PREFIX.size:
        raise TruncatedFile(_CKPT_PREFIX.size, len(blob), path)
    magic, version, hlen = _CKPT_PREFIX.unpack_from(blob)
    if magic != CKPT_MAGIC:
        raise BadMagic(f"expected checkpoint magic {CKPT_MAGIC!r}, found {magic!r}")
    if version != CKPT_VERSION:
        raise UnsupportedVersion(f"checkpoint version {version} is not supported")
    start = _CKPT_PREFIX.size
    if len(blob) < start + hlen:
        raise TruncatedFile(start + hlen, len(blob), path)
    header = json.loads(blob[start:start + hlen])
    offset = start + hlen
    expected = offset + sum(8 * int(np.prod(shape)) for _, shape in header["arrays"])
    if len(blob) != expected:
        raise TruncatedFile(expected - offset, len(blob) - offset, path)
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    model = ProbeModel({name: arrays[name] for name in PARAM_NAMES})
    dims = header["dims"]
    if (model.input_dim, model.hidden, model.n_spatial, model.n_temporal) != (
            dims["input"], dims["hidden"], dims["spatial"], dims["temporal"]):
        raise ClipFormatError("checkpoint array shapes disagree with its recorded dimensions")
    return Checkpoint(model, Standardizer(arrays["input_mean"], arrays["input_scale"]), header["catalog"],
                      tuple(header["pool_grid"]), header.get("meta", {}))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write_bytes(path, encode_checkpoint(ckpt))


def load_checkpoint(path, catalog: Optional[TaskCatalog] = None) -> Checkpoint:
    ckpt = decode_checkpoint(Path(path).read_bytes(), path)
    if catalog is not None:
        ckpt.check_catalog(catalog)
    return ckpt
