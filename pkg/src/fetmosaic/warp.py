"""Perspective warping of images and masks, and circular field-of-view masks.

Images are float64 arrays of shape ``(H, W)`` or ``(H, W, 3)`` with samples in
``[0, 1]``; masks are boolean ``(H, W)`` arrays. Sample ``(x, y)`` is the
center of pixel column ``x``, row ``y``.
"""
from __future__ import annotations

import numpy as np
import numpy.typing as npt
from scipy import ndimage

from .errors import DimensionMismatch
from .homography import W_EPS, Homography, invert, project

Image = npt.NDArray[np.float64]
FovMask = npt.NDArray[np.bool_]


def as_image(img: npt.ArrayLike) -> Image:
    """Validate an image array and return it as float64."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] not in (1, 3)):
        raise DimensionMismatch(f"image must be HxW or HxWx3; got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch("image must have positive width and height")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image samples must be finite and within [0, 1]")
    return arr


def check_same_size(a: npt.NDArray, b: npt.NDArray, what: str = "grids") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what} differ in size: {a.shape[:2]} vs {b.shape[:2]}")


def _destination_grid(out_width: int, out_height: int):
    ys, xs = np.mgrid[0:out_height, 0:out_width].astype(np.float64)
    return xs, ys


def back_project(back: Homography, src_width: int, src_height: int, out_width: int, out_height: int):
    """Source coordinates ``(u, v)`` of every destination pixel and their in-bounds mask.

    ``back`` maps destination coordinates to source coordinates. A location is
    in bounds when ``0 <= u <= width - 1`` and ``0 <= v <= height - 1``.
    """
    xs, ys = _destination_grid(out_width, out_height)
    u, v, w = project(back, xs, ys)
    finite_w = np.abs(w) > W_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(finite_w, u / np.where(finite_w, w, 1.0), -1.0)
        v = np.where(finite_w, v / np.where(finite_w, w, 1.0), -1.0)
    inside = finite_w & (u >= 0.0) & (u <= src_width - 1) & (v >= 0.0) & (v <= src_height - 1)
    return u, v, inside


def sample_bilinear(img: Image, u: npt.NDArray, v: npt.NDArray) -> npt.NDArray[np.float64]:
    """Bilinear samples of ``img`` at float coordinates; integral locations read one pixel."""
    coords = np.stack([v.ravel(), u.ravel()])
    if img.ndim == 2:
        out = ndimage.map_coordinates(img, coords, order=1, mode="nearest")
        return out.reshape(u.shape)
    chans = [
        ndimage.map_coordinates(img[:, :, c], coords, order=1, mode="nearest").reshape(u.shape)
        for c in range(img.shape[2])
    ]
    return np.stack(chans, axis=-1)


def sample_nearest(mask: FovMask, u: npt.NDArray, v: npt.NDArray, inside: npt.NDArray) -> FovMask:
    """Nearest-neighbour lookup of ``mask``; out-of-bounds locations read False."""
    h, w = mask.shape
    ui = np.clip(np.floor(u + 0.5), 0, w - 1).astype(np.intp)
    vi = np.clip(np.floor(v + 0.5), 0, h - 1).astype(np.intp)
    return inside & mask[vi, ui]


def remap(src: Image, back: Homography, out_width: int, out_height: int) -> tuple[Image, FovMask]:
    """Resample ``src`` through a destination-to-source homography.

    Returns the resampled image (0 where invalid) and its validity mask.
    """
    h, w = src.shape[:2]
    u, v, inside = back_project(back, w, h, out_width, out_height)
    out = sample_bilinear(src, np.where(inside, u, 0.0), np.where(inside, v, 0.0))
    if out.ndim == 3:
        out[~inside] = 0.0
    else:
        out = np.where(inside, out, 0.0)
    return out, inside


def warp_image(src: npt.ArrayLike, h: Homography, out_width: int, out_height: int) -> tuple[Image, FovMask]:
    """Warp ``src`` by ``h`` (source to destination) with bilinear interpolation.

    Raises:
        SingularMatrix: if ``h`` cannot be inverted
    """
    return remap(as_image(src), invert(h), out_width, out_height)


def warp_mask(src: npt.ArrayLike, h: Homography, out_width: int, out_height: int) -> FovMask:
    """Warp a boolean mask by ``h`` with nearest-neighbour lookup.

    Raises:
        SingularMatrix: if ``h`` cannot be inverted
    """
    mask = np.asarray(src, dtype=bool)
    sh, sw = mask.shape
    u, v, inside = back_project(invert(h), sw, sh, out_width, out_height)
    return sample_nearest(mask, u, v, inside)


def circular_mask(width: int, height: int, margin_fraction: float = 0.0) -> FovMask:
    """Disk inscribed in the frame, centered at ``(width/2, height/2)``.

    A pixel is inside when its distance from the center is below
    ``min(width, height) / 2 * (1 - margin_fraction)``.
    """
    if not 0.0 <= margin_fraction < 0.5:
        raise ValueError(f"margin_fraction must lie in [0, 0.5); got {margin_fraction}")
    radius = min(width, height) / 2.0 * (1.0 - margin_fraction)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.hypot(xs - width / 2.0, ys - height / 2.0) < radius
