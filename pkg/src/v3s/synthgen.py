"""Synthetic single-object videos and the measurements used as test oracles.

Objects are drawn hard-edged (no anti-aliasing): a pixel belongs to the
object when its centre falls inside the shape. The background is a static
field made of a base level, an optional linear ramp and optional seeded
noise, identical in every frame, so a scene with zero velocity renders
identical frames.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .errors import MultipleObjects, NoObject, ObjectOutOfBounds
from .geometry import Point2

SHAPES = ("rectangle", "ellipse")


@dataclass(frozen=True)
class ShapeScene:
    shape: str = "rectangle"
    size: tuple[float, float] = (10.0, 10.0)
    start: tuple[float, float] = (32.0, 32.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    width: int = 64
    height: int = 64
    n_frames: int = 16
    foreground: float = 1.0
    background: float = 0.0
    gradient: tuple[float, float] = (0.0, 0.0)
    noise: float = 0.0
    channels: int = 1
    seed: int = 0

    def __post_init__(self):
        for name in ("size", "start", "velocity", "gradient"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.n_frames < 1:
            raise ValueError("a scene needs at least one frame")
        w, h = self.size
        for t in (0, self.n_frames - 1):
            cx, cy = self.centre(t)
            if cx - w / 2 < 0 or cx + w / 2 > self.width or cy - h / 2 < 0 or cy + h / 2 > self.height:
                raise ObjectOutOfBounds(
                    f"object centred at ({cx:.2f}, {cy:.2f}) leaves the {self.width}x{self.height} frame at t={t}")
        bg = self.background_field()
        if np.min(np.abs(self.foreground - bg)) < 0.5:
            raise ValueError("foreground must differ from every background sample by at least 0.5")

    def centre(self, t: float) -> Point2:
        return Point2(self.start[0] + t * self.velocity[0], self.start[1] + t * self.velocity[1])

    def background_field(self) -> np.ndarray:
        yy, xx = np.mgrid[0:self.height, 0:self.width].astype(np.float64) + 0.5
        bg = self.background + self.gradient[0] * xx / self.width + self.gradient[1] * yy / self.height
        if self.noise > 0:
            bg = bg + np.random.default_rng(self.seed).normal(0.0, self.noise, bg.shape)
        return np.clip(bg, 0.0, 1.0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeScene":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def render(scene: ShapeScene) -> np.ndarray:
    """Render a ``(n_frames, H, W, C)`` float32 video."""
    bg = scene.background_field()
    yy, xx = np.mgrid[0:scene.height, 0:scene.width].astype(np.float64) + 0.5
    hw, hh = scene.size[0] / 2, scene.size[1] / 2
    video = np.empty((scene.n_frames, scene.height, scene.width), dtype=np.float64)
    for t in range(scene.n_frames):
        cx, cy = scene.centre(t)
        if scene.shape == "rectangle":
            mask = (xx >= cx - hw) & (xx < cx + hw) & (yy >= cy - hh) & (yy < cy + hh)
        else:
            mask = ((xx - cx) / hw) ** 2 + ((yy - cy) / hh) ** 2 < 1.0
        video[t] = np.where(mask, scene.foreground, bg)
    video = np.repeat(video[..., None], scene.channels, axis=-1)
    return video.astype(np.float32)


class Extent(NamedTuple):
    width: int
    height: int
    centroid: Point2


def measure_extent(frame: np.ndarray, threshold: float = 0.5) -> Extent:
    """Bounding box and intensity-weighted centroid of the single bright object."""
    frame = np.asarray(frame, dtype=np.float64)
    gray = frame.mean(axis=-1) if frame.ndim == 3 else frame
    mask = gray > threshold
    labels, n = ndimage.label(mask, structure=np.ones((3, 3)))
    if n == 0:
        raise NoObject(f"no sample above threshold {threshold}")
    if n > 1:
        raise MultipleObjects(f"{n} separate regions above threshold {threshold}")
    rows, cols = np.nonzero(mask)
    w = gray[rows, cols]
    cx = float(np.sum(w * (cols + 0.5)) / np.sum(w))
    cy = float(np.sum(w * (rows + 0.5)) / np.sum(w))
    return Extent(int(cols.max() - cols.min() + 1), int(rows.max() - rows.min() + 1), Point2(cx, cy))


@dataclass
class Motion:
    displacements: np.ndarray
    mean_magnitude: float
    mean_angle: float
    centroids: np.ndarray = field(repr=False, default=None)


def measure_motion(clip: np.ndarray, threshold: float = 0.5) -> Motion:
    """Per-step centroid displacements of a ``(T, H, W, C)`` clip.

    ``mean_angle`` is in degrees, measured with y pointing down, of the mean
    displacement vector (0 for a static clip).
    """
    cents = np.array([measure_extent(f, threshold).centroid for f in clip], dtype=np.float64)
    disp = np.diff(cents, axis=0)
    if len(disp) == 0:
        return Motion(disp.reshape(0, 2), 0.0, 0.0, cents)
    mean = disp.mean(axis=0)
    angle = math.degrees(math.atan2(mean[1], mean[0])) if np.any(np.abs(mean) > 1e-12) else 0.0
    return Motion(disp, float(np.linalg.norm(disp, axis=1).mean()), angle, cents)


@dataclass(frozen=True)
class CorpusConfig:
    """Parameters for a corpus of randomly placed moving objects.

    Every object has the same size and speed; only shape, start and
    (when ``headings`` is not 1) heading vary, so apparent speed and
    proportions carry the transformation signal. ``headings=0`` draws a
    uniform heading, ``headings=k`` one of ``k`` evenly spaced headings
    starting at +x.

    The defaults are a tall bar sliding along +x over a ramp background.
    A thin tall bar makes aspect changes easy to see after pooling, a
    single heading keeps speed readable from a coarse pooled grid, and the
    ramp exposes where the warp moved the frame content.
    """
    n_videos: int = 200
    frame_size: int = 64
    n_frames: int = 72
    object_size: float | tuple[float, float] = (10.0, 44.0)
    object_speed: float = 0.75
    foreground: float = 1.0
    background: float = 0.0
    gradient: tuple[float, float] = (0.22, 0.22)
    noise: float = 0.0
    channels: int = 1
    headings: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def random_scene(rng: np.random.Generator, cfg: CorpusConfig, seed: Optional[int] = None) -> ShapeScene:
    if cfg.headings:
        theta = 2 * math.pi * int(rng.integers(0, cfg.headings)) / cfg.headings
    else:
        theta = rng.uniform(0.0, 2 * math.pi)
    vx, vy = cfg.object_speed * math.cos(theta), cfg.object_speed * math.sin(theta)
    travel_x, travel_y = vx * (cfg.n_frames - 1), vy * (cfg.n_frames - 1)
    ow, oh = (cfg.object_size, cfg.object_size) if np.isscalar(cfg.object_size) else cfg.object_size
    size = float(cfg.frame_size)

    def start_range(travel, extent):
        lo = extent / 2 - min(travel, 0.0) + 1e-6
        hi = size - extent / 2 - max(travel, 0.0) - 1e-6
        if hi < lo:
            raise ObjectOutOfBounds("object travel exceeds the frame; lower object_speed or n_frames")
        return lo, hi

    sx = rng.uniform(*start_range(travel_x, ow))
    sy = rng.uniform(*start_range(travel_y, oh))
    return ShapeScene(
        shape=SHAPES[int(rng.integers(0, len(SHAPES)))],
        size=(ow, oh),
        start=(sx, sy),
        velocity=(vx, vy),
        width=cfg.frame_size,
        height=cfg.frame_size,
        n_frames=cfg.n_frames,
        foreground=cfg.foreground,
        background=cfg.background,
        gradient=cfg.gradient,
        noise=cfg.noise,
        channels=cfg.channels,
        seed=int(rng.integers(0, 2**31 - 1)) if seed is None else seed,
    )
