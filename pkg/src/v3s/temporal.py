"""Playback-speed transformations by frame-index sampling.

A speed ``s`` clip takes every ``s``-th frame (``s - 1`` frames skipped
between samples), so speed 1 is the original video. ``literal=True``
switches to the alternative stride ``s - 1`` reading, kept only for
comparison: under it speed 1 freezes on a single frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClipTooShort

CLIP_LEN = 16
STAGE_LEN = 8


def _stride(s: int, literal: bool) -> int:
    return s - 1 if literal else s


@dataclass(frozen=True)
class TemporalSpec:
    kind: str
    s: int = 1
    s1: int = 1
    s2: int = 2
    l: int = CLIP_LEN
    l1: int = STAGE_LEN
    l2: int = STAGE_LEN

    def __post_init__(self):
        if self.kind == "scale":
            if int(self.s) != self.s or self.s < 1:
                raise ValueError(f"speed must be a positive integer, got {self.s}")
            if self.l < 1:
                raise ValueError(f"clip length must be positive, got {self.l}")
        elif self.kind == "projection":
            if min(self.s1, self.s2) < 1 or int(self.s1) != self.s1 or int(self.s2) != self.s2:
                raise ValueError(f"stage speeds must be positive integers, got ({self.s1}, {self.s2})")
            if self.s1 == self.s2:
                raise ValueError("a speed pattern needs two different stage speeds")
            if self.l1 < 1 or self.l2 < 1:
                raise ValueError(f"stage lengths must be positive, got ({self.l1}, {self.l2})")
        else:
            raise ValueError(f"unknown temporal kind {self.kind!r}")

    @classmethod
    def scale(cls, s: int, l: int = CLIP_LEN) -> "TemporalSpec":
        return cls("scale", s=int(s), l=int(l))

    @classmethod
    def projection(cls, s1: int, s2: int, l1: int = STAGE_LEN, l2: int = STAGE_LEN) -> "TemporalSpec":
        return cls("projection", s1=int(s1), s2=int(s2), l1=int(l1), l2=int(l2))

    @property
    def length(self) -> int:
        return self.l if self.kind == "scale" else self.l1 + self.l2

    @property
    def name(self) -> str:
        if self.kind == "scale":
            return f"scale:{self.s}"
        return f"projection:{self.s1},{self.s2}"

    @classmethod
    def parse(cls, text: str, l: int = CLIP_LEN, l1: int = STAGE_LEN, l2: int = STAGE_LEN) -> "TemporalSpec":
        kind, _, args = text.strip().lower().partition(":")
        try:
            parts = [int(p) for p in args.split(",")] if args else []
            if kind == "scale" and len(parts) == 1:
                return cls.scale(parts[0], l)
            if kind == "projection" and len(parts) == 2:
                return cls.projection(parts[0], parts[1], l1, l2)
        except ValueError as exc:
            raise ValueError(f"bad temporal spec {text!r}: {exc}") from None
        raise ValueError(f"bad temporal spec {text!r}")

    def indices(self, video_len: int, r: int, literal: bool = False) -> list[int]:
        if self.kind == "scale":
            return scale_indices(video_len, self.s, r, self.l, literal)
        return projection_indices(video_len, self.s1, self.s2, r, self.l1, self.l2, literal)


def scale_indices(video_len: int, s: int, r: int, l: int, literal: bool = False) -> list[int]:
    """``[r, r+s, ..., r+(l-1)s]``."""
    step = _stride(s, literal)
    idx = [r + k * step for k in range(l)]
    if r < 0 or idx[-1] >= video_len:
        raise ClipTooShort(f"speed {s} x {l} frames from {r} needs {idx[-1] + 1} frames, video has {video_len}")
    return idx


def projection_indices(video_len: int, s1: int, s2: int, r: int, l1: int, l2: int,
                       literal: bool = False) -> list[int]:
    """``l1`` frames at speed ``s1`` from ``r``, then ``l2`` at speed ``s2``.

    Stage two continues from the last stage-one frame, so its first frame
    sits one ``s2`` stride after it.
    """
    a, b = _stride(s1, literal), _stride(s2, literal)
    first = [r + k * a for k in range(l1)]
    second = [first[-1] + (k + 1) * b for k in range(l2)]
    idx = first + second
    if r < 0 or idx[-1] >= video_len:
        raise ClipTooShort(f"pattern ({s1},{s2}) from {r} needs {idx[-1] + 1} frames, video has {video_len}")
    return idx


def required_span(spec: TemporalSpec, literal: bool = False) -> int:
    """Shortest video that admits the spec with start 0."""
    if spec.kind == "scale":
        return (spec.l - 1) * _stride(spec.s, literal) + 1
    return (spec.l1 - 1) * _stride(spec.s1, literal) + spec.l2 * _stride(spec.s2, literal) + 1


def choose_start(rng: np.random.Generator, video_len: int, span: int) -> int:
    if span > video_len:
        raise ClipTooShort(f"span {span} exceeds video length {video_len}")
    return int(rng.integers(0, video_len - span + 1))


def sample_clip(video: np.ndarray, spec: TemporalSpec, r: int, literal: bool = False) -> np.ndarray:
    return video[spec.indices(len(video), r, literal)]
