"""Registration consistency: smoothed, warped and cropped SSIM between frame pairs.

A pair fails when the warped source field of view covers less than a quarter
of the target field of view. Otherwise both images are cropped to the bounding
box of the overlap and scored by the mean of the local SSIM map over the overlap
pixels of the crop.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import ndimage
from skimage.metrics import structural_similarity

from .errors import CropTooSmall, EmptyInput, InvalidArgument, LengthMismatch, TooFewFrames
from .homography import Homography, chain
from .models import ConsistencyConfig, ConsistencyOutcome, ConsistencySummary, CropBox, PairSpec, RegistrationResult
from .registration import effective_homographies
from .warp import FovMask, Image, as_image, check_same_size, warp_image, warp_mask
from .workers import map_ordered

logger = logging.getLogger(__name__)

# skimage truncates its Gaussian window at 3.5 sigma
_SSIM_TRUNCATE = 3.5


def gaussian_kernel(size: int = 9, sigma: float = 2.0) -> npt.NDArray[np.float64]:
    """Normalized 1D Gaussian sampled at integer offsets ``-(size//2)..size//2``."""
    x = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def smooth(img: npt.ArrayLike, cfg: Optional[ConsistencyConfig] = None) -> Image:
    """Separable Gaussian blur with reflect-101 borders, per channel."""
    cfg = cfg or ConsistencyConfig()
    img = as_image(img)
    k = gaussian_kernel(cfg.smoothing_size, cfg.smoothing_sigma)
    out = ndimage.convolve1d(img, k, axis=0, mode="mirror")
    return ndimage.convolve1d(out, k, axis=1, mode="mirror")


def overlap_region(h: Homography, fov: npt.ArrayLike) -> tuple[FovMask, float]:
    """Target FOV pixels also covered by the source FOV warped by ``h``.

    Returns:
        The overlap mask and its size relative to the target FOV

    Raises:
        SingularMatrix: if ``h`` is not invertible
        EmptyInput: if the FOV mask is empty
    """
    fov = np.asarray(fov, dtype=bool)
    total = int(fov.sum())
    if total == 0:
        raise EmptyInput("the field-of-view mask is empty")
    height, width = fov.shape
    overlap = fov & warp_mask(fov, h, width, height)
    return overlap, overlap.sum() / total


def _bounding_box(mask: FovMask) -> CropBox:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return CropBox(x0=int(cols[0]), y0=int(rows[0]), x1=int(cols[-1]) + 1, y1=int(rows[-1]) + 1)


def ssim_window_radius(cfg: ConsistencyConfig) -> int:
    return int(_SSIM_TRUNCATE * cfg.ssim_sigma + 0.5)


def masked_ssim(a: Image, b: Image, mask: FovMask, cfg: Optional[ConsistencyConfig] = None) -> float:
    """Mean of the Gaussian-window SSIM map of ``a`` and ``b`` over ``mask``.

    RGB inputs are scored per channel and averaged.

    Raises:
        CropTooSmall: if the images are smaller than the SSIM window
    """
    cfg = cfg or ConsistencyConfig()
    radius = ssim_window_radius(cfg)
    if min(a.shape[:2]) < 2 * radius + 1:
        raise CropTooSmall(
            f"crop {a.shape[1]}x{a.shape[0]} is smaller than the {2 * radius + 1}px SSIM window"
        )
    _, ssim_map = structural_similarity(
        a,
        b,
        gaussian_weights=True,
        sigma=cfg.ssim_sigma,
        use_sample_covariance=False,
        data_range=cfg.data_range,
        K1=cfg.k1,
        K2=cfg.k2,
        channel_axis=-1 if a.ndim == 3 else None,
        full=True,
    )
    if ssim_map.ndim == 3:
        ssim_map = ssim_map.mean(axis=-1)
    if not mask.any():
        raise EmptyInput("no pixels to average the SSIM map over")
    return float(np.clip(ssim_map[mask].mean(), -1.0, 1.0))


def consistency_score(
    source: npt.ArrayLike,
    target: npt.ArrayLike,
    h: Homography,
    fov: npt.ArrayLike,
    cfg: Optional[ConsistencyConfig] = None,
) -> ConsistencyOutcome:
    """Score ``source`` warped by ``h`` against ``target``.

    The steps run in the order smooth, warp, overlap, crop, SSIM.

    Raises:
        DimensionMismatch: if images and FOV mask differ in size
        SingularMatrix: if ``h`` is not invertible
        CropTooSmall: if the overlap crop is smaller than the SSIM window
    """
    cfg = cfg or ConsistencyConfig()
    source = as_image(source)
    target = as_image(target)
    fov = np.asarray(fov, dtype=bool)
    check_same_size(source, target, "source and target")
    check_same_size(target, fov, "images and field-of-view mask")
    height, width = fov.shape

    src_s = smooth(source, cfg)
    tgt_s = smooth(target, cfg)
    warped, _ = warp_image(src_s, h, width, height)
    overlap, fraction = overlap_region(h, fov)
    fraction = float(fraction)
    if fraction < cfg.overlap_threshold:
        return ConsistencyOutcome(status="failed_low_overlap", overlap_fraction=fraction)

    box = _bounding_box(overlap)
    rows, cols = slice(box.y0, box.y1), slice(box.x0, box.x1)
    scored = overlap[rows, cols]
    if cfg.erode_overlap:
        radius = ssim_window_radius(cfg)
        interior = ndimage.binary_erosion(
            overlap, structure=np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool), border_value=0
        )
        if interior.any():
            scored = interior[rows, cols]
    value = masked_ssim(warped[rows, cols], tgt_s[rows, cols], scored, cfg)
    return ConsistencyOutcome(status="scored", ssim=value, overlap_fraction=fraction, crop=box)


def score_chained(
    frames: Sequence[npt.ArrayLike],
    hs: Sequence[Homography],
    gap: int,
    fov: npt.ArrayLike,
    cfg: Optional[ConsistencyConfig] = None,
    threads: Optional[int] = None,
) -> list[tuple[PairSpec, ConsistencyOutcome]]:
    """Score every pair ``(i, i + gap)`` with the chained homography ``hs[i..i+gap-1]``.

    Raises:
        InvalidArgument: if ``gap < 1``
        TooFewFrames: if there are no more frames than ``gap``
        LengthMismatch: if ``hs`` does not hold one homography per consecutive pair
    """
    if gap < 1:
        raise InvalidArgument(f"gap must be >= 1; got {gap}")
    n = len(frames)
    if n <= gap:
        raise TooFewFrames(f"{n} frames hold no pair {gap} frames apart")
    if len(hs) != n - 1:
        raise LengthMismatch(f"{len(hs)} pairwise homographies for {n} frames")

    def one(i: int) -> tuple[PairSpec, ConsistencyOutcome]:
        outcome = consistency_score(frames[i], frames[i + gap], chain(hs, i, gap), fov, cfg)
        return PairSpec(source_index=i, target_index=i + gap), outcome

    results = map_ordered(one, range(n - gap), threads)
    summary = summarize([o for _, o in results])
    logger.info(
        "consistency gap %d: %d scored, %d failed, mean ssim %s",
        gap, summary.scored, summary.failed,
        f"{summary.mean_ssim:.4f}" if summary.mean_ssim is not None else "n/a",
    )
    return results


def sequence_consistency(
    frames: Sequence[npt.ArrayLike],
    pairwise: Sequence[RegistrationResult],
    gap: int,
    fov: npt.ArrayLike,
    cfg: Optional[ConsistencyConfig] = None,
    threads: Optional[int] = None,
) -> list[tuple[PairSpec, ConsistencyOutcome]]:
    """Consistency of all pairs ``gap`` frames apart; failed registrations chain as identity."""
    return score_chained(frames, effective_homographies(pairwise), gap, fov, cfg, threads)


def summarize(outcomes: Sequence[ConsistencyOutcome]) -> ConsistencySummary:
    scores = [o.ssim for o in outcomes if o.status == "scored"]
    return ConsistencySummary(
        scored=len(scores),
        failed=len(outcomes) - len(scores),
        mean_ssim=float(np.mean(scores)) if scores else None,
    )
