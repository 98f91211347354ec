"""Projective maps defined by four point correspondences.

A homography is stored as the eight free coefficients ``m0..m7`` of::

    | m0 m1 m2 |
    | m3 m4 m5 |
    | m6 m7 1  |

and maps ``(x, y)`` to ``(u, v)`` with

    u = (m0*x + m1*y + m2) / (m6*x + m7*y + 1)
    v = (m3*x + m4*y + m5) / (m6*x + m7*y + 1)

Quads list their corners as (top-left, bottom-left, bottom-right, top-right),
i.e. ``(0,0), (0,H), (W,H), (W,0)`` for a full ``W x H`` frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDenominator, DegenerateQuad, SingularSystem

EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


def _cross(o: Point2, a: Point2, b: Point2) -> float:
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


@dataclass(frozen=True)
class Quad:
    corners: tuple[Point2, Point2, Point2, Point2]

    def __post_init__(self):
        pts = tuple(Point2(float(p[0]), float(p[1])) for p in self.corners)
        if len(pts) != 4:
            raise DegenerateQuad(f"a quad needs 4 corners, got {len(pts)}")
        if not all(math.isfinite(v) for p in pts for v in p):
            raise DegenerateQuad(f"non-finite corner in {pts}")
        object.__setattr__(self, "corners", pts)
        scale = max(1.0, max(abs(v) for p in pts for v in p))
        for i in range(4):
            for j in range(i + 1, 4):
                if math.hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) <= EPS * scale:
                    raise DegenerateQuad(f"corners {i} and {j} coincide")
        # no three corners collinear; tolerance relative to the squared extent
        for skip in range(4):
            a, b, c = (pts[k] for k in range(4) if k != skip)
            if abs(_cross(a, b, c)) <= 1e-12 * scale * scale:
                raise DegenerateQuad(f"three corners of {pts} are collinear")

    @classmethod
    def rect(cls, width: float, height: float) -> "Quad":
        """Full-frame rectangle in canonical corner order."""
        return cls(((0.0, 0.0), (0.0, height), (width, height), (width, 0.0)))

    def as_array(self) -> np.ndarray:
        return np.array(self.corners, dtype=np.float64)

    def bbox(self) -> tuple[float, float, float, float]:
        arr = self.as_array()
        return (arr[:, 0].min(), arr[:, 1].min(), arr[:, 0].max(), arr[:, 1].max())


@dataclass(frozen=True)
class Homography:
    m: tuple[float, ...]

    def __post_init__(self):
        m = tuple(float(v) for v in self.m)
        if len(m) != 8:
            raise ValueError(f"a homography has 8 free coefficients, got {len(m)}")
        if not all(math.isfinite(v) for v in m):
            raise SingularSystem(f"non-finite coefficient in {m}")
        object.__setattr__(self, "m", m)
        mat = self.matrix
        det = np.linalg.det(mat / np.abs(mat).max())
        if abs(det) <= EPS:
            raise SingularSystem(f"homography matrix is singular (normalized det {det:.3e})")

    @classmethod
    def identity(cls) -> "Homography":
        return cls((1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_matrix(cls, mat) -> "Homography":
        mat = np.asarray(mat, dtype=np.float64)
        if abs(mat[2, 2]) <= EPS:
            raise SingularSystem("cannot normalize a homography whose (2,2) entry is zero")
        mat = mat / mat[2, 2]
        return cls(tuple(mat.reshape(-1)[:8]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([*self.m, 1.0], dtype=np.float64).reshape(3, 3)


def build_system(src: Quad, dst: Quad) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the 8x8 correspondence system, u-rows first then v-rows."""
    A = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src.corners, dst.corners)):
        A[i] = (x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u)
        rhs[i] = u
        A[i + 4] = (0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v)
        rhs[i + 4] = v
    return A, rhs


def gauss_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Raises SingularSystem as soon as the best available pivot is below 1e-12.
    """
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = A.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[piv, col]) < EPS:
            raise SingularSystem(f"pivot {A[piv, col]:.3e} in column {col} (degenerate correspondence)")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            f = A[row, col] / A[col, col]
            if f != 0.0:
                A[row, col:] -= f * A[col, col:]
                b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - A[row, row + 1:] @ x[row + 1:]) / A[row, row]
    return x


def solve_homography(src: Quad, dst: Quad) -> Homography:
    """Homography sending each corner of ``src`` to the matching corner of ``dst``."""
    A, rhs = build_system(src, dst)
    return Homography(tuple(gauss_solve(A, rhs)))


def map_point(h: Homography, p: Sequence[float]) -> Point2:
    m0, m1, m2, m3, m4, m5, m6, m7 = h.m
    x, y = float(p[0]), float(p[1])
    den = m6 * x + m7 * y + 1.0
    if abs(den) < EPS:
        raise DegenerateDenominator(f"({x}, {y}) lies on the projective horizon")
    return Point2((m0 * x + m1 * y + m2) / den, (m3 * x + m4 * y + m5) / den)


def map_points(h: Homography, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``map_point``. Points on the horizon come back as NaN."""
    m0, m1, m2, m3, m4, m5, m6, m7 = h.m
    den = m6 * x + m7 * y + 1.0
    bad = np.abs(den) < EPS
    den = np.where(bad, np.nan, den)
    return (m0 * x + m1 * y + m2) / den, (m3 * x + m4 * y + m5) / den


def invert(h: Homography) -> Homography:
    mat = h.matrix
    det = np.linalg.det(mat)
    if abs(det) < EPS:
        raise SingularSystem(f"determinant {det:.3e} too small to invert")
    return Homography.from_matrix(np.linalg.inv(mat))
