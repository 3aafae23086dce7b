"""Pairwise direct registration by masked pyramidal Lucas-Kanade.

The optimizer is forward-additive Gauss-Newton over an affine (6) or
projective (8) warp ``W(x; p)`` mapping fixed-frame pixels into the moving
frame. It minimizes the mean of ``[fixed(x) - moving(W(x; p))]**2`` over pixels
inside the field-of-view mask whose warped location is valid. The returned
homography is ``W^-1``: it maps moving-frame coordinates into the fixed frame.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import ndimage

from .errors import (
    DegenerateGradient,
    DimensionMismatch,
    ImageTooSmall,
    InsufficientOverlap,
    InvalidArgument,
    RegistrationError,
    SingularMatrix,
    TooFewFrames,
)
from .homography import W_EPS, Homography, frame_corners, identity, invert, project
from .models import RegistrationConfig, RegistrationResult
from .ports import PairRegistrar
from .warp import FovMask, Image, as_image, check_same_size, sample_bilinear, sample_nearest
from .workers import map_ordered

logger = logging.getLogger(__name__)

BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
MAX_HALVINGS = 5
COND_LIMIT = 1e12
# Moving samples must keep their bilinear and gradient stencils inside the FOV
_SUPPORT = np.ones((5, 5), dtype=bool)

_N_PARAMS = {"affine6": 6, "projective8": 8}
_SCALE_UP = np.diag([2.0, 2.0, 1.0])
_SCALE_DOWN = np.diag([0.5, 0.5, 1.0])


def to_luma(img: npt.ArrayLike) -> Image:
    """Single-channel substrate: RGB becomes 0.299R + 0.587G + 0.114B."""
    arr = as_image(img)
    if arr.ndim == 3:
        return np.clip(arr @ LUMA_WEIGHTS, 0.0, 1.0)
    return arr


def _smooth_binomial(img: Image) -> Image:
    out = ndimage.convolve1d(img, BINOMIAL_5, axis=0, mode="mirror")
    return ndimage.convolve1d(out, BINOMIAL_5, axis=1, mode="mirror")


def build_pyramid(img: npt.ArrayLike, mask: npt.ArrayLike, levels: int) -> list[tuple[Image, FovMask]]:
    """Binomial pyramid; level 0 is the input, each level halves the previous.

    A coarse mask pixel is True only if all 5x5 pixels that fed it were True.

    Raises:
        ImageTooSmall: if the image cannot be halved ``levels - 1`` times
    """
    if levels < 1:
        raise InvalidArgument(f"levels must be >= 1; got {levels}")
    img = as_image(img)
    mask = np.asarray(mask, dtype=bool)
    check_same_size(img, mask, "image and mask")
    if min(img.shape[:2]) < 2 ** (levels - 1):
        raise ImageTooSmall(
            f"a {img.shape[1]}x{img.shape[0]} image cannot carry {levels} pyramid levels"
        )
    pyramid = [(img, mask)]
    for _ in range(1, levels):
        prev_img, prev_mask = pyramid[-1]
        smoothed = _smooth_binomial(prev_img)
        kept = ndimage.minimum_filter(prev_mask.astype(np.uint8), size=5, mode="mirror") > 0
        pyramid.append((smoothed[::2, ::2], kept[::2, ::2]))
    return pyramid


def grad_image(image: Image) -> tuple[Image, Image]:
    """Central differences; the outermost rows and columns are left at 0."""
    gx = np.zeros_like(image)
    gx[:, 1:-1] = (image[:, 2:] - image[:, :-2]) / 2
    gy = np.zeros_like(image)
    gy[1:-1] = (image[2:] - image[:-2]) / 2
    return gx, gy


# --- warp parameters ---

def params_to_matrix(p: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    m = np.array([
        [1.0 + p[0], p[2], p[4]],
        [p[1], 1.0 + p[3], p[5]],
        [0.0, 0.0, 1.0],
    ])
    if p.size == 8:
        m[2, 0], m[2, 1] = p[6], p[7]
    return m


def matrix_to_params(m: npt.NDArray[np.float64], parameterization: str) -> npt.NDArray[np.float64]:
    m = m / m[2, 2]
    p = np.array([m[0, 0] - 1.0, m[1, 0], m[0, 1], m[1, 1] - 1.0, m[0, 2], m[1, 2], m[2, 0], m[2, 1]])
    return p[:_N_PARAMS[parameterization]]


@dataclass
class _Level:
    """Precomputed data of one pyramid level."""
    fixed_vals: npt.NDArray[np.float64]
    xs: npt.NDArray[np.float64]
    ys: npt.NDArray[np.float64]
    moving: Image
    gx: Image
    gy: Image
    support: FovMask
    n_mask: int
    width: int
    height: int


@dataclass
class _Eval:
    ok: npt.NDArray[np.bool_]
    u: npt.NDArray[np.float64]
    v: npt.NDArray[np.float64]
    w: npt.NDArray[np.float64]
    residual: npt.NDArray[np.float64]
    fraction: float

    @property
    def mse(self) -> float:
        return float(np.mean(self.residual ** 2)) if self.residual.size else float("inf")


def _prepare_level(fixed: Image, moving: Image, mask: FovMask) -> _Level:
    h, w = fixed.shape
    ys, xs = np.nonzero(mask)
    gx, gy = grad_image(moving)
    support = ndimage.binary_erosion(mask, structure=_SUPPORT, border_value=0)
    return _Level(
        fixed_vals=fixed[ys, xs],
        xs=xs.astype(np.float64),
        ys=ys.astype(np.float64),
        moving=moving,
        gx=gx,
        gy=gy,
        support=support,
        n_mask=int(xs.size),
        width=w,
        height=h,
    )


def _evaluate(level: _Level, p: npt.NDArray[np.float64]) -> _Eval:
    u, v, w = project(Homography(params_to_matrix(p)), level.xs, level.ys)
    finite = np.abs(w) > W_EPS
    w_safe = np.where(finite, w, 1.0)
    u, v = u / w_safe, v / w_safe
    # Interior only: central-difference gradients are undefined on the border
    ok = finite & (u >= 1.0) & (u <= level.width - 2) & (v >= 1.0) & (v <= level.height - 2)
    ok = sample_nearest(level.support, u, v, ok)
    u, v, w = u[ok], v[ok], w_safe[ok]
    residual = level.fixed_vals[ok] - sample_bilinear(level.moving, u, v)
    fraction = float(ok.sum()) / level.n_mask if level.n_mask else 0.0
    return _Eval(ok=ok, u=u, v=v, w=w, residual=residual, fraction=fraction)


def _jacobian(level: _Level, ev: _Eval, n_params: int) -> npt.NDArray[np.float64]:
    """d moving(W(x; p)) / dp for every used pixel."""
    gx = sample_bilinear(level.gx, ev.u, ev.v)
    gy = sample_bilinear(level.gy, ev.u, ev.v)
    x, y = level.xs[ev.ok], level.ys[ev.ok]
    if n_params == 6:
        return np.stack([gx * x, gy * x, gx * y, gy * y, gx, gy], axis=1)
    inv_d = 1.0 / ev.w
    gx, gy = gx * inv_d, gy * inv_d
    radial = -(gx * ev.u + gy * ev.v)
    return np.stack([gx * x, gy * x, gx * y, gy * y, gx, gy, radial * x, radial * y], axis=1)


def _gauss_newton_step(jac: npt.NDArray[np.float64], residual: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    normal = jac.T @ jac
    rhs = jac.T @ residual
    diag = np.diag(normal)
    if diag.size == 0 or np.any(diag <= 0.0):
        raise DegenerateGradient("image gradient vanishes for at least one warp parameter")
    # Jacobi scaling makes the condition estimate independent of pixel units
    s = 1.0 / np.sqrt(diag)
    scaled = normal * s[:, None] * s[None, :]
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateGradient(f"normal matrix condition estimate {cond:.3g} exceeds {COND_LIMIT:.0e}")
    return s * np.linalg.solve(scaled, s * rhs)


def _corner_shift(p: npt.NDArray[np.float64], q: npt.NDArray[np.float64], width: int, height: int) -> float:
    corners = frame_corners(width, height)
    a_u, a_v, a_w = project(Homography(params_to_matrix(p)), corners[:, 0], corners[:, 1])
    b_u, b_v, b_w = project(Homography(params_to_matrix(q)), corners[:, 0], corners[:, 1])
    return float(np.max(np.hypot(a_u / a_w - b_u / b_w, a_v / a_w - b_v / b_w)))


def photometric_jacobian(
    fixed: npt.ArrayLike,
    moving: npt.ArrayLike,
    mask: npt.ArrayLike,
    params: npt.ArrayLike,
    parameterization: str = "affine6",
):
    """Residual, analytic Jacobian and used-pixel mask at full resolution.

    The residual is ``fixed(x) - moving(W(x; p))`` over the used pixels (row
    order of ``np.nonzero(mask)``); the Jacobian is ``d moving(W(x; p)) / dp``.
    """
    p = np.asarray(params, dtype=np.float64)
    level = _prepare_level(as_image(fixed), as_image(moving), np.asarray(mask, dtype=bool))
    ev = _evaluate(level, p)
    return ev.residual, _jacobian(level, ev, p.size), ev.ok


def _optimize_level(level: _Level, p: npt.NDArray[np.float64], cfg: RegistrationConfig, index: int):
    ev = _evaluate(level, p)
    if ev.fraction < cfg.min_valid_overlap_fraction:
        raise InsufficientOverlap(
            f"level {index}: only {ev.fraction:.1%} of masked pixels are valid "
            f"(need {cfg.min_valid_overlap_fraction:.0%})"
        )
    if np.ptp(level.fixed_vals) == 0.0:
        raise DegenerateGradient(f"level {index}: fixed image is constant inside the mask")
    history = [ev.mse]
    converged = False
    iterations = 0
    for _ in range(cfg.max_iterations_per_level):
        iterations += 1
        dp = _gauss_newton_step(_jacobian(level, ev, p.size), ev.residual)

        if _corner_shift(p, p + dp, level.width, level.height) < cfg.convergence_epsilon:
            trial = _evaluate(level, p + dp)
            if trial.fraction >= cfg.min_valid_overlap_fraction and trial.mse <= history[-1]:
                p, ev = p + dp, trial
                history.append(ev.mse)
            converged = True
            break

        step, accepted = dp, None
        for _ in range(MAX_HALVINGS + 1):
            trial = _evaluate(level, p + step)
            if trial.fraction >= cfg.min_valid_overlap_fraction and trial.mse <= history[-1]:
                accepted = trial
                break
            step = step / 2.0
        if accepted is None:
            # no halved step lowers the error: p is already at the minimum
            converged = True
            break
        shift = _corner_shift(p, p + step, level.width, level.height)
        p, ev = p + step, accepted
        history.append(ev.mse)
        if shift < cfg.convergence_epsilon:
            converged = True
            break

    logger.debug("level %d: %d iterations, mse %.6g, converged=%s", index, iterations, ev.mse, converged)
    return p, ev, iterations, converged, tuple(history)


def register_pair(
    fixed: npt.ArrayLike,
    moving: npt.ArrayLike,
    mask: npt.ArrayLike,
    cfg: Optional[RegistrationConfig] = None,
    init: Optional[Homography] = None,
) -> RegistrationResult:
    """Register ``moving`` onto ``fixed`` inside ``mask``.

    Args:
        fixed: single-channel reference frame
        moving: single-channel frame to align, same size as ``fixed``
        mask: field-of-view mask shared by both frames
        cfg: optimizer settings; defaults to :class:`RegistrationConfig()`
        init: initial moving-to-fixed homography; defaults to identity

    Returns:
        Result whose ``h`` maps moving-frame coordinates into the fixed frame

    Raises:
        DimensionMismatch: if the frames differ in size or are not single-channel
        ImageTooSmall: if the frames cannot carry the pyramid
        InsufficientOverlap: if too few masked pixels stay valid at some level
        DegenerateGradient: if the normal equations are ill-conditioned
    """
    cfg = cfg or RegistrationConfig()
    fixed = as_image(fixed)
    moving = as_image(moving)
    mask = np.asarray(mask, dtype=bool)
    if fixed.ndim != 2 or moving.ndim != 2:
        raise DimensionMismatch("register_pair expects single-channel frames; convert with to_luma")
    check_same_size(fixed, moving, "fixed and moving frames")
    check_same_size(fixed, mask, "frames and mask")

    fixed_pyr = build_pyramid(fixed, mask, cfg.pyramid_levels)
    moving_pyr = build_pyramid(moving, mask, cfg.pyramid_levels)

    warp = invert(init).matrix if init is not None else np.eye(3)
    for _ in range(cfg.pyramid_levels - 1):
        warp = _SCALE_DOWN @ warp @ _SCALE_UP
    p = matrix_to_params(warp, cfg.parameterization)

    iterations: list[int] = []
    histories: list[tuple[float, ...]] = []
    converged = False
    ev = None
    for index in range(cfg.pyramid_levels - 1, -1, -1):
        (f_img, f_mask), (m_img, _) = fixed_pyr[index], moving_pyr[index]
        level = _prepare_level(f_img, m_img, f_mask)
        p, ev, its, converged, hist = _optimize_level(level, p, cfg, index)
        iterations.append(its)
        histories.append(hist)
        if index > 0:
            p = matrix_to_params(_SCALE_UP @ params_to_matrix(p) @ _SCALE_DOWN, cfg.parameterization)

    return RegistrationResult(
        h=invert(Homography(params_to_matrix(p))),
        final_residual=ev.mse,
        iterations_used=tuple(reversed(iterations)),
        converged=converged,
        history=tuple(reversed(histories)),
    )


def effective_homographies(results: Sequence[RegistrationResult]) -> list[Homography]:
    """Homographies to chain: non-converged pairs count as the identity."""
    return [r.h if r.converged else identity() for r in results]


def _identity_residual(fixed: Image, moving: Image, mask: FovMask) -> float:
    if not mask.any():
        return float("inf")
    return float(np.mean((fixed[mask] - moving[mask]) ** 2))


def register_sequence(
    frames: Sequence[npt.ArrayLike],
    mask: npt.ArrayLike,
    cfg: Optional[RegistrationConfig] = None,
    registrar: PairRegistrar = register_pair,
    threads: Optional[int] = None,
) -> list[RegistrationResult]:
    """Register every frame onto its successor.

    ``result[i]`` maps frame ``i`` (moving) into frame ``i + 1`` (fixed). A pair
    whose registration fails gets the identity with ``converged=False``; the
    rest of the sequence is unaffected.

    Raises:
        TooFewFrames: if fewer than two frames are given
        DimensionMismatch: if frame sizes differ
    """
    if len(frames) < 2:
        raise TooFewFrames(f"registration needs at least 2 frames; got {len(frames)}")
    cfg = cfg or RegistrationConfig()
    substrate = [to_luma(f) for f in frames]
    mask = np.asarray(mask, dtype=bool)
    for img in substrate:
        check_same_size(substrate[0], img, "sequence frames")
    check_same_size(substrate[0], mask, "frames and mask")

    def one(i: int) -> RegistrationResult:
        fixed, moving = substrate[i + 1], substrate[i]
        try:
            return registrar(fixed, moving, mask, cfg, identity())
        except (RegistrationError, SingularMatrix) as e:
            logger.warning("pair %d->%d failed, using identity: %s", i, i + 1, e)
            return RegistrationResult(
                h=identity(),
                final_residual=_identity_residual(fixed, moving, mask),
                iterations_used=(0,) * cfg.pyramid_levels,
                converged=False,
                failure_reason=f"{type(e).__name__}: {e}",
            )

    results = map_ordered(one, range(len(substrate) - 1), threads)
    failed = sum(not r.converged for r in results)
    logger.info("registered %d pairs (%d not converged)", len(results), failed)
    return results
