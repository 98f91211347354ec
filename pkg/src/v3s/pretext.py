"""Class catalogs, spec draws and labeled sample generation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ClipTooShort, ExhaustedRetries
from .seeding import derive_seed
from .temporal import CLIP_LEN, STAGE_LEN, TemporalSpec, choose_start, required_span
from .warp import (Rect, SpatialSpec, apply_spatial, center_crop, head_length, preprocess_clip,
                   random_crop, short_side_dims)

SCALE_FACTORS = ((1, 1.15), (1, 1.3), (1, 1.45), (1.15, 1), (1.3, 1), (1.45, 1))
PROJECTION_FACTORS = (0.8, 0.65, 0.5)
PROJECTION_SIDES = ("left", "right", "top", "bottom")
SPEEDS = (1, 2, 3)
SPEED_PATTERNS = ((1, 2), (2, 3), (3, 4), (4, 5), (2, 1), (3, 2), (4, 3), (5, 4))

MAX_RETRIES = 100


@dataclass(frozen=True)
class TaskCatalog:
    spatial_classes: tuple[SpatialSpec, ...]
    temporal_classes: tuple[TemporalSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "spatial_classes", tuple(self.spatial_classes))
        object.__setattr__(self, "temporal_classes", tuple(self.temporal_classes))
        for name, classes in (("spatial", self.spatial_classes), ("temporal", self.temporal_classes)):
            if not classes:
                raise ValueError(f"{name} class list is empty")
            if len(set(classes)) != len(classes):
                raise ValueError(f"{name} class list has duplicate entries")

    @property
    def n_spatial(self) -> int:
        return len(self.spatial_classes)

    @property
    def n_temporal(self) -> int:
        return len(self.temporal_classes)

    def to_dict(self) -> dict:
        return {
            "spatial": [s.name for s in self.spatial_classes],
            "temporal": [dict(name=t.name, length=t.length, l=t.l, l1=t.l1, l2=t.l2)
                         for t in self.temporal_classes],
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_catalog(scales: Sequence = SCALE_FACTORS, projections: Sequence = PROJECTION_FACTORS,
                 sides: Sequence = PROJECTION_SIDES, speeds: Sequence = SPEEDS,
                 patterns: Sequence = SPEED_PATTERNS, include_identity: bool = True,
                 clip_len: int = CLIP_LEN, stage_lens: tuple[int, int] = (STAGE_LEN, STAGE_LEN)) -> TaskCatalog:
    spatial = [SpatialSpec.identity()] if include_identity else []
    spatial += [SpatialSpec.scale(a, b) for a, b in scales]
    spatial += [SpatialSpec.projection(c, side) for c in projections for side in sides]
    temporal = [TemporalSpec.scale(s, clip_len) for s in speeds]
    temporal += [TemporalSpec.projection(s1, s2, *stage_lens) for s1, s2 in patterns]
    return TaskCatalog(tuple(spatial), tuple(temporal))


def default_catalog() -> TaskCatalog:
    """19 spatial classes (identity, 6 scales, 3 c x 4 sides) and 11 temporal."""
    return make_catalog()


@dataclass(frozen=True)
class LabelPair:
    spatial_class: int
    temporal_class: int


@dataclass(frozen=True)
class GeometryConfig:
    resize_to: int = 64
    crop_size: int = 32
    stride_literal: bool = False


@dataclass
class LabeledSample:
    clip: np.ndarray
    labels: LabelPair
    provenance: dict = field(default_factory=dict)


def draw_specs(rng: np.random.Generator, catalog: TaskCatalog) -> tuple[SpatialSpec, TemporalSpec, LabelPair]:
    i = int(rng.integers(0, catalog.n_spatial))
    j = int(rng.integers(0, catalog.n_temporal))
    return catalog.spatial_classes[i], catalog.temporal_classes[j], LabelPair(i, j)


def transform_clip(video: np.ndarray, spatial: SpatialSpec, temporal: TemporalSpec, r: int,
                   geometry: GeometryConfig, crop_rng: Optional[np.random.Generator] = None,
                   crop_xy: Optional[tuple[int, int]] = None) -> tuple[np.ndarray, dict]:
    """Temporal selection, spatial warp and preprocessing for one clip.

    Only the selected frames are warped; the warp is per-frame and
    time-invariant, so this equals warping the whole video first.
    The crop offset comes from ``crop_xy`` if given, else ``crop_rng``, else
    the centre.
    """
    frames = video[temporal.indices(len(video), r, geometry.stride_literal)]
    _, H, W, _ = frames.shape
    warped = apply_spatial(frames, spatial)
    _, ch, cw, _ = warped.shape
    rw, rh = short_side_dims(cw, ch, geometry.resize_to)
    size = geometry.crop_size
    if crop_xy is not None:
        crop = Rect(int(crop_xy[0]), int(crop_xy[1]), size, size)
    elif crop_rng is not None:
        crop = random_crop(crop_rng, rw, rh, size, size)
    else:
        crop = center_crop(rw, rh, size, size)
    head = head_length(spatial, W, H)
    out = preprocess_clip(warped, geometry.resize_to, crop, head, spatial.side)
    # the head-end square replaces the crop offset when it is the smaller region
    used_head = head is not None and head * geometry.resize_to / min(cw, ch) < geometry.resize_to
    return out, {"start": r, "crop": None if used_head else [crop.x, crop.y]}


def generate_sample(video: np.ndarray, rng: np.random.Generator, catalog: TaskCatalog,
                    geometry: GeometryConfig = GeometryConfig(), video_id=None) -> LabeledSample:
    """Draw specs, pick a start, transform and preprocess one clip."""
    spatial, temporal, labels = draw_specs(rng, catalog)
    span = required_span(temporal, geometry.stride_literal)
    try:
        r = choose_start(rng, len(video), span)
    except ClipTooShort as exc:
        raise ClipTooShort(str(exc), video_id) from None
    clip, info = transform_clip(video, spatial, temporal, r, geometry, crop_rng=rng)
    provenance = {"video": video_id, "spatial": spatial.name, "temporal": temporal.name, **info}
    return LabeledSample(clip, labels, provenance)


def build_dataset(videos: Mapping[str, np.ndarray], n_samples: int, seed: int, catalog: TaskCatalog,
                  geometry: GeometryConfig = GeometryConfig()) -> list[LabeledSample]:
    """``n_samples`` labeled clips; sample ``i`` depends only on ``(seed, i)``.

    A draw whose temporal span does not fit the chosen video is redrawn
    (new video and specs) up to 100 times.
    """
    ids = sorted(videos)
    if n_samples and not ids:
        raise ExhaustedRetries("no source videos")
    samples = []
    for i in range(n_samples):
        child = derive_seed(seed, "sample", i)
        rng = np.random.default_rng(child)
        for _ in range(MAX_RETRIES):
            vid = ids[int(rng.integers(0, len(ids)))]
            try:
                sample = generate_sample(videos[vid], rng, catalog, geometry, vid)
            except ClipTooShort:
                continue
            sample.provenance["seed"] = child
            samples.append(sample)
            break
        else:
            raise ExhaustedRetries(f"sample {i}: no fitting (video, spec) draw after {MAX_RETRIES} tries")
    return samples
