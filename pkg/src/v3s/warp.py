"""Spatial transformations: corner parameterizations and frame resampling.

Frames are ``(H, W, C)`` float arrays with samples in [0, 1]; clips stack
them as ``(T, H, W, C)``. Pixel ``(row i, col j)`` covers the unit square
``[j, j+1] x [i, i+1]`` of the continuous plane, so a ``W x H`` frame spans
exactly the rectangle ``(0,0)-(W,H)`` used by the corner formulas and pixel
centres sit at half-integer coordinates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidCrop, InvalidFactor
from .geometry import Homography, Quad, invert, map_points, solve_homography


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"


@dataclass(frozen=True)
class SpatialSpec:
    kind: str
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    side: Optional[Side] = None

    def __post_init__(self):
        if self.kind == "identity":
            return
        if self.kind == "scale":
            if not (self.a > 0 and self.b > 0):
                raise InvalidFactor(f"scale factors must be positive, got ({self.a}, {self.b})")
            if (self.a == 1.0) == (self.b == 1.0):
                raise InvalidFactor(f"exactly one of a, b must equal 1, got ({self.a}, {self.b})")
        elif self.kind == "projection":
            if not 0.0 < self.c < 1.0:
                raise InvalidFactor(f"projection factor c must lie in (0, 1), got {self.c}")
            object.__setattr__(self, "side", Side(self.side))
        else:
            raise ValueError(f"unknown spatial kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "SpatialSpec":
        return cls("identity")

    @classmethod
    def scale(cls, a: float, b: float) -> "SpatialSpec":
        return cls("scale", a=float(a), b=float(b))

    @classmethod
    def projection(cls, c: float, side) -> "SpatialSpec":
        return cls("projection", c=float(c), side=Side(side))

    @property
    def name(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "scale":
            return f"scale:{self.a:g},{self.b:g}"
        return f"projection:{self.c:g},{self.side.value}"

    @classmethod
    def parse(cls, text: str) -> "SpatialSpec":
        """Inverse of ``name``: ``identity``, ``scale:a,b`` or ``projection:c,side``."""
        kind, _, args = text.strip().lower().partition(":")
        parts = [p.strip() for p in args.split(",")] if args else []
        try:
            if kind == "identity" and not parts:
                return cls.identity()
            if kind == "scale" and len(parts) == 2:
                return cls.scale(float(parts[0]), float(parts[1]))
            if kind == "projection" and len(parts) == 2:
                return cls.projection(float(parts[0]), Side(parts[1]))
        except ValueError as exc:
            raise InvalidFactor(f"bad spatial spec {text!r}: {exc}") from None
        raise InvalidFactor(f"bad spatial spec {text!r}")

    def corners(self, width: float, height: float) -> Quad:
        if self.kind == "identity":
            return Quad.rect(width, height)
        if self.kind == "scale":
            return scale_corners(width, height, self.a, self.b)
        return projection_corners(width, height, self.c, self.side)


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    width: int
    height: int


def scale_corners(width, height, a, b) -> Quad:
    if not (a > 0 and b > 0):
        raise InvalidFactor(f"scale factors must be positive, got ({a}, {b})")
    return Quad(((0.0, 0.0), (0.0, b * height), (a * width, b * height), (a * width, 0.0)))


def projection_corners(width, height, c, side) -> Quad:
    """Trapezoid whose head end (the shortened edge) lies on ``side``.

    The head end is centred on its edge and is ``c`` times that edge's length.
    """
    if not 0.0 < c < 1.0:
        raise InvalidFactor(f"projection factor c must lie in (0, 1), got {c}")
    W, H = float(width), float(height)
    lo_v, hi_v = (H - c * H) / 2, (H + c * H) / 2
    lo_u, hi_u = (W - c * W) / 2, (W + c * W) / 2
    side = Side(side)
    if side is Side.RIGHT:
        pts = ((0, 0), (0, H), (W, hi_v), (W, lo_v))
    elif side is Side.LEFT:
        pts = ((0, lo_v), (0, hi_v), (W, H), (W, 0))
    elif side is Side.TOP:
        pts = ((lo_u, 0), (0, H), (W, H), (hi_u, 0))
    else:
        pts = ((0, 0), (lo_u, H), (hi_u, H), (W, 0))
    return Quad(pts)


def _ceil(x: float) -> int:
    # absorb representation error such as 100 * 1.3 == 130.00000000000003
    return int(math.ceil(x - 1e-9))


def spec_homography(spec: SpatialSpec, width: int, height: int) -> tuple[Homography, int, int]:
    """Homography from the full frame onto the spec's quad, plus its canvas size."""
    dst = spec.corners(width, height)
    h = solve_homography(Quad.rect(width, height), dst)
    _, _, x1, y1 = dst.bbox()
    return h, _ceil(x1), _ceil(y1)


def sample_bilinear(clip: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinearly sample every frame of ``clip`` at continuous coordinates.

    ``clip`` is ``(T, H, W, C)``; ``x``/``y`` share one shape ``S``; the result
    is ``(T, *S, C)`` float32. Coordinates outside ``[0, W] x [0, H]`` (or NaN)
    give 0; inside, samples near the border clamp to the edge pixels.
    """
    T, H, W, C = clip.shape
    inside = np.isfinite(x) & np.isfinite(y) & (x >= 0) & (x <= W) & (y >= 0) & (y <= H)
    fx = np.clip(np.nan_to_num(x, nan=0.0) - 0.5, 0.0, W - 1)
    fy = np.clip(np.nan_to_num(y, nan=0.0) - 0.5, 0.0, H - 1)
    x0 = np.minimum(np.floor(fx).astype(np.intp), max(W - 2, 0))
    y0 = np.minimum(np.floor(fy).astype(np.intp), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = (fx - x0)[..., None]
    wy = (fy - y0)[..., None]
    src = clip.astype(np.float64, copy=False)
    top = src[:, y0, x0] * (1 - wx) + src[:, y0, x1] * wx
    bot = src[:, y1, x0] * (1 - wx) + src[:, y1, x1] * wx
    out = top * (1 - wy) + bot * wy
    out *= inside[..., None]
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _pixel_centres(out_width: int, out_height: int) -> tuple[np.ndarray, np.ndarray]:
    v, u = np.mgrid[0:out_height, 0:out_width].astype(np.float64)
    return u + 0.5, v + 0.5


def warp_clip(clip: np.ndarray, h: Homography, out_width: int, out_height: int) -> np.ndarray:
    """Warp all frames of a ``(T, H, W, C)`` clip with one homography."""
    u, v = _pixel_centres(out_width, out_height)
    x, y = map_points(invert(h), u, v)
    return sample_bilinear(clip, x, y)


def warp_frame(frame: np.ndarray, h: Homography, out_width: int, out_height: int) -> np.ndarray:
    """Output pixel ``(u, v)`` = input sampled at ``invert(h)`` applied to ``(u, v)``."""
    return warp_clip(np.asarray(frame)[None], h, out_width, out_height)[0]


def resample_region(clip: np.ndarray, x0: float, y0: float, w: float, h: float,
                    out_width: int, out_height: int) -> np.ndarray:
    """Resample the axis-aligned region ``(x0, y0, w, h)`` onto an output grid."""
    sx, sy = out_width / w, out_height / h
    hom = Homography((sx, 0.0, -sx * x0, 0.0, sy, -sy * y0, 0.0, 0.0))
    return warp_clip(clip, hom, out_width, out_height)


def resize_clip(clip: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    _, H, W, _ = clip.shape
    if (W, H) == (out_width, out_height):
        return np.array(clip, dtype=np.float32)
    return resample_region(clip, 0.0, 0.0, W, H, out_width, out_height)


def short_side_dims(width: int, height: int, resize_to: int) -> tuple[int, int]:
    """Dimensions after scaling the shorter side to ``resize_to`` (aspect kept)."""
    s = resize_to / min(width, height)
    return int(round(width * s)), int(round(height * s))


def apply_spatial(clip: np.ndarray, spec: SpatialSpec, out_width: Optional[int] = None,
                  out_height: Optional[int] = None) -> np.ndarray:
    """Apply one spatial spec to every frame of a ``(T, H, W, C)`` clip.

    The output canvas defaults to the bounding box of the spec's quad.
    """
    clip = np.asarray(clip)
    _, H, W, _ = clip.shape
    if spec.kind == "identity":
        return resize_clip(clip, out_width or W, out_height or H)
    h, cw, ch = spec_homography(spec, W, H)
    return warp_clip(clip, h, out_width or cw, out_height or ch)


def head_square(width: float, height: float, side, head_len: float) -> tuple[float, float]:
    """Top-left corner of the ``head_len`` square flush against ``side``, centred on it."""
    side = Side(side)
    if side is Side.RIGHT:
        return width - head_len, (height - head_len) / 2
    if side is Side.LEFT:
        return 0.0, (height - head_len) / 2
    if side is Side.TOP:
        return (width - head_len) / 2, 0.0
    return (width - head_len) / 2, height - head_len


def random_crop(rng: np.random.Generator, width: int, height: int, crop_w: int, crop_h: int) -> Rect:
    if crop_w > width or crop_h > height:
        raise InvalidCrop(f"crop {crop_w}x{crop_h} exceeds frame {width}x{height}")
    return Rect(int(rng.integers(0, width - crop_w + 1)), int(rng.integers(0, height - crop_h + 1)),
                crop_w, crop_h)


def center_crop(width: int, height: int, crop_w: int, crop_h: int) -> Rect:
    if crop_w > width or crop_h > height:
        raise InvalidCrop(f"crop {crop_w}x{crop_h} exceeds frame {width}x{height}")
    return Rect((width - crop_w) // 2, (height - crop_h) // 2, crop_w, crop_h)


def preprocess_clip(clip: np.ndarray, resize_to: int, crop: Rect,
                    projection_head_len: Optional[float] = None, head_side=None) -> np.ndarray:
    """Clip-level form of :func:`preprocess` (one crop shared by all frames)."""
    clip = np.asarray(clip)
    _, H, W, _ = clip.shape
    rw, rh = short_side_dims(W, H, resize_to)
    if projection_head_len is not None:
        if head_side is None:
            raise InvalidCrop("projection preprocessing needs the head-end side")
        scale = resize_to / min(W, H)
        if projection_head_len * scale < resize_to:
            # crop the head-end square in source coordinates and resample once
            x0, y0 = head_square(W, H, head_side, projection_head_len)
            return resample_region(clip, x0, y0, projection_head_len, projection_head_len,
                                   crop.width, crop.height)
    if crop.x < 0 or crop.y < 0 or crop.x + crop.width > rw or crop.y + crop.height > rh:
        raise InvalidCrop(f"crop {crop} exceeds resized frame {rw}x{rh}")
    resized = resize_clip(clip, rw, rh)
    return np.ascontiguousarray(resized[:, crop.y:crop.y + crop.height, crop.x:crop.x + crop.width])


def preprocess(frame: np.ndarray, resize_to: int, crop: Rect,
               projection_head_len: Optional[float] = None, head_side=None) -> np.ndarray:
    """Resize (shorter side to ``resize_to``) then crop ``crop``.

    With a projection head end shorter than ``resize_to`` the frame is instead
    cut to the ``l x l`` square flush against the head end and resized to the
    crop size. ``projection_head_len`` is measured in input pixels.
    """
    return preprocess_clip(np.asarray(frame)[None], resize_to, crop, projection_head_len, head_side)[0]


def head_length(spec: SpatialSpec, width: float, height: float) -> Optional[float]:
    if spec.kind != "projection":
        return None
    edge = height if spec.side in (Side.LEFT, Side.RIGHT) else width
    return spec.c * edge
