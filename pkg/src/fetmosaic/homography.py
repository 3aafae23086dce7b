"""Homogeneous-coordinate algebra on 3x3 projective transforms.

A :class:`Homography` maps pixel coordinates ``(x, y, 1)`` of one frame to the
corresponding point in another frame, up to scale. Values are immutable and
always stored in canonical form: scaled so that ``m[2, 2] == 1`` when that
entry is usable, otherwise scaled to unit Frobenius norm.
"""
from __future__ import annotations

from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from .errors import IndexOutOfRange, PointAtInfinity, SingularMatrix, ZeroMatrix

# |w'| at or below this is treated as the line at infinity
W_EPS = 1e-12
# |m[2, 2]| at or below this switches normalization to the Frobenius norm
SCALE_EPS = 1e-12
_SINGULAR_COND = 1e13

Matrix = npt.NDArray[np.float64]


class Point2(NamedTuple):
    x: float
    y: float


def normalize_matrix(m: npt.ArrayLike) -> Matrix:
    """Return ``m`` in canonical scale as a fresh float64 array."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"homography must be 3x3; got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ZeroMatrix("homography has non-finite entries")
    if abs(m[2, 2]) > SCALE_EPS:
        return m / m[2, 2]
    norm = np.linalg.norm(m)
    if norm == 0.0:
        raise ZeroMatrix("cannot normalize the zero matrix")
    return m / norm


class Homography:
    """Immutable 3x3 projective transform in canonical scale."""

    __slots__ = ("_m",)

    def __init__(self, m: npt.ArrayLike):
        mat = normalize_matrix(m)
        if np.linalg.matrix_rank(mat) < 3:
            raise SingularMatrix("homography matrix is rank deficient")
        mat.setflags(write=False)
        self._m = mat

    @property
    def matrix(self) -> Matrix:
        """Read-only canonical matrix."""
        return self._m

    @property
    def is_affine(self) -> bool:
        return self._m[2, 0] == 0.0 and self._m[2, 1] == 0.0

    def to_list(self) -> list[float]:
        """Nine numbers, row-major."""
        return [float(v) for v in self._m.ravel()]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "Homography":
        if len(values) != 9:
            raise ValueError(f"a homography needs 9 numbers; got {len(values)}")
        return cls(np.asarray(values, dtype=np.float64).reshape(3, 3))

    def allclose(self, other: "Homography", atol: float = 1e-9) -> bool:
        """Element-wise comparison of the canonical matrices."""
        return bool(np.allclose(self._m, other._m, rtol=0.0, atol=atol))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self._m, other._m))

    def __hash__(self) -> int:
        return hash(self._m.tobytes())

    def __matmul__(self, other: "Homography") -> "Homography":
        return compose(self, other)

    def __repr__(self) -> str:
        rows = "; ".join(" ".join(f"{v:.6g}" for v in row) for row in self._m)
        return f"Homography([{rows}])"


# --- constructors ---

def identity() -> Homography:
    return Homography(np.eye(3))


def translation(tx: float, ty: float) -> Homography:
    return Homography([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def similarity(
    angle_deg: float = 0.0,
    scale: float = 1.0,
    tx: float = 0.0,
    ty: float = 0.0,
    center: tuple[float, float] = (0.0, 0.0),
) -> Homography:
    """Rotation and isotropic scale about ``center`` followed by a shift."""
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t) * scale, np.sin(t) * scale
    cx, cy = center
    about = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    to_origin = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    back = np.array([[1.0, 0.0, cx + tx], [0.0, 1.0, cy + ty], [0.0, 0.0, 1.0]])
    return Homography(back @ about @ to_origin)


# --- operations ---

def normalize(h: Homography | npt.ArrayLike) -> Homography:
    """Canonical-scale copy; :class:`Homography` values are already canonical."""
    if isinstance(h, Homography):
        return h
    return Homography(h)


def map_point(h: Homography, p: Point2 | tuple[float, float]) -> Point2:
    """Map one point, dividing by the homogeneous coordinate."""
    x, y = float(p[0]), float(p[1])
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= W_EPS:
        raise PointAtInfinity(f"({x}, {y}) maps to the line at infinity (w'={w:.3g})")
    xp = m[0, 0] * x + m[0, 1] * y + m[0, 2]
    yp = m[1, 0] * x + m[1, 1] * y + m[1, 2]
    return Point2(xp / w, yp / w)


def map_points(h: Homography, pts: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Vectorized :func:`map_point` over an ``(N, 2)`` array."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    u, v, w = project(h, pts[:, 0], pts[:, 1])
    if np.any(np.abs(w) <= W_EPS):
        raise PointAtInfinity("at least one point maps to the line at infinity")
    return np.stack([u / w, v / w], axis=1)


def project(h: Homography, xs: npt.ArrayLike, ys: npt.ArrayLike):
    """Homogeneous images ``(x', y', w')`` of coordinate arrays, not divided."""
    m = h.matrix
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    u = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
    v = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
    w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    return u, v, w


def compose(a: Homography, b: Homography) -> Homography:
    """``a`` after ``b``: map_point(compose(a, b), p) == map_point(a, map_point(b, p))."""
    return Homography(a.matrix @ b.matrix)


def chain(hs: Sequence[Homography], i: int, n: int) -> Homography:
    """Chain ``hs[i+n-1] ... hs[i+1] hs[i]``; the earliest transform applies first."""
    if n < 0 or i < 0 or i + n > len(hs):
        raise IndexOutOfRange(
            f"chain({i}, {n}) is outside a sequence of {len(hs)} homographies"
        )
    if n == 0:
        return identity()
    return reduce(lambda acc, h: compose(h, acc), hs[i + 1:i + n], hs[i])


def invert(h: Homography) -> Homography:
    m = h.matrix
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > _SINGULAR_COND:
        raise SingularMatrix(f"homography is singular (condition number {cond:.3g})")
    return Homography(np.linalg.inv(m))


def is_invertible(h: Homography) -> bool:
    cond = np.linalg.cond(h.matrix)
    return bool(np.isfinite(cond) and cond <= _SINGULAR_COND)


def corner_error(a: Homography, b: Homography, width: int, height: int) -> float:
    """Largest distance between the two images of a frame's four corners."""
    corners = frame_corners(width, height)
    return float(np.max(np.linalg.norm(map_points(a, corners) - map_points(b, corners), axis=1)))


def frame_corners(width: int, height: int) -> npt.NDArray[np.float64]:
    """Pixel-center corners of a ``width`` x ``height`` frame, clockwise from the origin."""
    w, h = float(width - 1), float(height - 1)
    return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
