"""Chained-homography mosaicking onto a common canvas."""
from __future__ import annotations

import logging
import math
from typing import Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .config import get_settings
from .errors import DimensionMismatch, IndexOutOfRange, LengthMismatch, PointAtInfinity
from .homography import (
    Homography,
    Point2,
    chain,
    compose,
    corner_error,
    frame_corners,
    invert,
    map_points,
    translation,
)
from .models import DriftRow, MosaicLayout, RegistrationResult
from .registration import effective_homographies
from .warp import FovMask, Image, as_image, warp_image, warp_mask
from .workers import map_ordered

logger = logging.getLogger(__name__)

Blend = Literal["overwrite_latest", "running_mean"]

# Warped frames held in memory at once while rendering
RENDER_BATCH = 16


def to_anchor(hs: Sequence[Homography], index: int, anchor: int) -> Homography:
    """Transform of frame ``index`` into the anchor frame's coordinates.

    ``hs[i]`` maps frame ``i`` into frame ``i + 1``.
    """
    if index <= anchor:
        return chain(hs, index, anchor - index)
    return invert(chain(hs, anchor, index - anchor))


def _warped_corners(h: Homography, width: int, height: int) -> Optional[npt.NDArray[np.float64]]:
    try:
        pts = map_points(h, frame_corners(width, height))
    except PointAtInfinity:
        return None
    return pts if np.all(np.isfinite(pts)) else None


def layout_from_homographies(
    hs: Sequence[Homography],
    frame_w: int,
    frame_h: int,
    anchor_index: int = 0,
    canvas_max: Optional[int] = None,
) -> MosaicLayout:
    """Canvas placement of ``len(hs) + 1`` frames chained through ``hs``.

    Frames whose warped corners fall outside a ``canvas_max`` square centered
    on the anchor frame are listed in ``excluded`` and left out of the hull.

    Raises:
        IndexOutOfRange: if ``anchor_index`` is not a frame index
    """
    n_frames = len(hs) + 1
    if not 0 <= anchor_index < n_frames:
        raise IndexOutOfRange(f"anchor {anchor_index} is outside {n_frames} frames")
    cap = canvas_max if canvas_max is not None else get_settings().canvas_max

    cx, cy = (frame_w - 1) / 2.0, (frame_h - 1) / 2.0
    half = cap / 2.0
    anchored: list[Homography] = []
    corners: list[npt.NDArray[np.float64]] = []
    excluded: list[int] = []
    for i in range(n_frames):
        h = to_anchor(hs, i, anchor_index)
        anchored.append(h)
        pts = _warped_corners(h, frame_w, frame_h)
        if i != anchor_index and (
            pts is None or np.any(np.abs(pts[:, 0] - cx) > half) or np.any(np.abs(pts[:, 1] - cy) > half)
        ):
            excluded.append(i)
            continue
        corners.append(pts)
    if excluded:
        logger.warning("canvas cap %d px excludes frames %s", cap, excluded)

    hull = np.concatenate(corners)
    off_x = math.floor(hull[:, 0].min())
    off_y = math.floor(hull[:, 1].min())
    width = math.ceil(hull[:, 0].max()) - off_x + 1
    height = math.ceil(hull[:, 1].max()) - off_y + 1
    shift = translation(-off_x, -off_y)
    return MosaicLayout(
        anchor_index=anchor_index,
        per_frame_to_canvas=tuple(compose(shift, h) for h in anchored),
        canvas_width=width,
        canvas_height=height,
        offset=Point2(float(off_x), float(off_y)),
        frame_width=frame_w,
        frame_height=frame_h,
        excluded=tuple(excluded),
    )


def layout(
    pairwise: Sequence[RegistrationResult],
    frame_w: int,
    frame_h: int,
    anchor_index: int = 0,
    canvas_max: Optional[int] = None,
) -> MosaicLayout:
    """Canvas placement from pairwise registrations; failed pairs chain as identity."""
    return layout_from_homographies(
        effective_homographies(pairwise), frame_w, frame_h, anchor_index, canvas_max
    )


def _canvas_box(h: Homography, lay: MosaicLayout) -> tuple[int, int, int, int]:
    """Canvas columns ``x0:x1`` and rows ``y0:y1`` a warped frame can touch."""
    pts = _warped_corners(h, lay.frame_width, lay.frame_height)
    if pts is None:
        return 0, lay.canvas_width, 0, lay.canvas_height
    x0 = max(0, math.floor(pts[:, 0].min()))
    y0 = max(0, math.floor(pts[:, 1].min()))
    x1 = min(lay.canvas_width, math.ceil(pts[:, 0].max()) + 1)
    y1 = min(lay.canvas_height, math.ceil(pts[:, 1].max()) + 1)
    return x0, max(x0, x1), y0, max(y0, y1)


def render(
    frames: Sequence[npt.ArrayLike],
    masks: Sequence[npt.ArrayLike],
    lay: MosaicLayout,
    blend: Blend = "running_mean",
    threads: Optional[int] = None,
) -> tuple[Image, FovMask]:
    """Warp every frame onto the canvas and blend in frame order.

    Each frame is warped only into its own bounding box on the canvas, and at
    most ``RENDER_BATCH`` warped frames are held before being blended.

    Returns:
        The mosaic (0 outside the union of valid pixels) and that union mask

    Raises:
        DimensionMismatch: if frame or mask counts differ from the layout
    """
    if len(frames) != lay.frame_count or len(masks) != lay.frame_count:
        raise DimensionMismatch(
            f"layout places {lay.frame_count} frames; got {len(frames)} frames and {len(masks)} masks"
        )
    if blend not in ("overwrite_latest", "running_mean"):
        raise ValueError(f"unknown blend mode {blend!r}")
    width, height = lay.canvas_width, lay.canvas_height
    skip = set(lay.excluded)
    todo = [i for i in range(lay.frame_count) if i not in skip]

    def warp_one(i: int):
        h = lay.per_frame_to_canvas[i]
        x0, x1, y0, y1 = _canvas_box(h, lay)
        if x1 == x0 or y1 == y0:
            return None
        local = compose(translation(-x0, -y0), h)
        img, inside = warp_image(frames[i], local, x1 - x0, y1 - y0)
        return (x0, x1, y0, y1), img, inside & warp_mask(masks[i], local, x1 - x0, y1 - y0)

    sample = as_image(frames[0])
    acc = np.zeros((height, width) + sample.shape[2:])
    count = np.zeros((height, width))
    union = np.zeros((height, width), dtype=bool)
    for start in range(0, len(todo), RENDER_BATCH):
        for item in map_ordered(warp_one, todo[start:start + RENDER_BATCH], threads):
            if item is None:
                continue
            (x0, x1, y0, y1), img, valid = item
            region = acc[y0:y1, x0:x1]
            hits = count[y0:y1, x0:x1]
            if blend == "overwrite_latest":
                region[valid] = img[valid]
                hits[valid] = 1.0
            else:
                region[valid] += img[valid]
                hits[valid] += 1.0
            union[y0:y1, x0:x1] |= valid

    safe = np.where(count > 0, count, 1.0)
    out = acc / (safe[:, :, None] if acc.ndim == 3 else safe)
    out[~union] = 0.0
    return np.clip(out, 0.0, 1.0), union


def drift_report(lay: MosaicLayout, ground_truth: Optional[Sequence[Homography]] = None) -> list[DriftRow]:
    """Per-frame max corner error between the layout and ground truth.

    ``ground_truth[i]`` maps frame ``i`` into anchor coordinates. The anchor
    row is always 0; without ground truth every other row is unavailable.

    Raises:
        LengthMismatch: if ground truth does not have one entry per frame
    """
    n = lay.frame_count
    if ground_truth is None:
        return [DriftRow(frame_index=i, corner_error_px=0.0 if i == lay.anchor_index else None) for i in range(n)]
    if len(ground_truth) != n:
        raise LengthMismatch(f"ground truth has {len(ground_truth)} homographies for {n} frames")

    unshift = translation(lay.offset.x, lay.offset.y)
    rows = []
    for i in range(n):
        if i == lay.anchor_index:
            err: Optional[float] = 0.0
        else:
            est = compose(unshift, lay.per_frame_to_canvas[i])
            try:
                err = corner_error(est, ground_truth[i], lay.frame_width, lay.frame_height)
            except PointAtInfinity:
                err = None
        rows.append(DriftRow(frame_index=i, corner_error_px=err))
    return rows


def reanchor(absolute: Sequence[Homography], anchor: int) -> list[Homography]:
    """Re-express frame-to-frame-0 transforms in the coordinates of ``anchor``."""
    if not 0 <= anchor < len(absolute):
        raise IndexOutOfRange(f"anchor {anchor} is outside {len(absolute)} frames")
    back = invert(absolute[anchor])
    return [compose(back, h) for h in absolute]
