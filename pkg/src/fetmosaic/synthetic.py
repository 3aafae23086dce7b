"""Planar synthetic scenes seen through random-walk homography trajectories.

Frames are cut out of a textured master image three times the frame size, so
every homography between frames is known exactly. ``gt_pairwise[i]`` maps frame
``i`` into frame ``i + 1``; ``gt_absolute[i]`` maps frame ``i`` into frame 0.
"""
from __future__ import annotations

import logging
import math
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import numpy.typing as npt
from PIL import Image as PILImage, ImageDraw
from scipy import ndimage

from . import dataset_io
from .errors import SizeTooSmall
from .homography import Homography, compose, identity, invert
from .models import TrajectorySpec
from .warp import FovMask, Image, circular_mask, remap

logger = logging.getLogger(__name__)

MIN_TEXTURE_SIZE = 64
MASTER_FACTOR = 3
SCALE_BOUNDS = (0.8, 1.25)
STROKE_WIDTH = (2, 6)
STROKE_DARKENING = (0.3, 0.6)


@dataclass(frozen=True)
class SyntheticSequence:
    frames: list[Image]
    fov: FovMask
    gt_pairwise: list[Homography]
    gt_absolute: list[Homography]
    vessel_maps: list[Image]
    labels: list[npt.NDArray[np.uint8]]
    centers: npt.NDArray[np.float64]


def _octave_noise(size: int, rng: np.random.Generator) -> Image:
    n_octaves = int(rng.integers(3, 6))
    total = np.zeros((size, size))
    for k in range(n_octaves):
        layer = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=2.0 * 2 ** k, mode="wrap")
        layer /= layer.std() or 1.0
        # coarsest octave carries weight 1, each finer one half the previous
        total += 0.5 ** (n_octaves - 1 - k) * layer
    lo, hi = np.percentile(total, [0.5, 99.5])
    return np.clip((total - lo) / (hi - lo), 0.0, 1.0)


def _stroke_paths(size: int, rng: np.random.Generator):
    n_strokes = max(4, size // 32)
    step = size / 20.0
    for _ in range(n_strokes):
        x, y = rng.uniform(0, size, 2)
        heading = rng.uniform(0, 2 * math.pi)
        points = [(float(x), float(y))]
        for _ in range(int(rng.integers(6, 13))):
            heading += rng.normal(0.0, 0.4)
            x += step * math.cos(heading)
            y += step * math.sin(heading)
            points.append((float(x), float(y)))
        width = int(rng.integers(STROKE_WIDTH[0], STROKE_WIDTH[1] + 1))
        darkening = float(rng.uniform(*STROKE_DARKENING))
        yield points, width, darkening


def _texture_with_strokes(size: int, rng: np.random.Generator) -> tuple[Image, Image]:
    """Textured master image and its binary stroke map."""
    if size < MIN_TEXTURE_SIZE:
        raise SizeTooSmall(f"texture size must be >= {MIN_TEXTURE_SIZE}; got {size}")
    base = _octave_noise(size, rng)
    canvas = PILImage.new("L", (size, size), 0)
    draw = ImageDraw.Draw(canvas)
    for points, width, darkening in _stroke_paths(size, rng):
        draw.line(points, fill=int(round(darkening * 255)), width=width, joint="curve")
    strokes = np.asarray(canvas, dtype=np.float64) / 255.0
    shade = ndimage.gaussian_filter(strokes, sigma=0.7)
    texture = np.clip(base * (1.0 - shade), 0.0, 1.0)
    return texture, (strokes > 0).astype(np.float64)


def generate_texture(size: int, seed: int) -> Image:
    """Band-limited random texture in [0, 1] crossed by dark vessel-like strokes.

    Raises:
        SizeTooSmall: if ``size < 64``
    """
    texture, _ = _texture_with_strokes(size, np.random.default_rng(seed))
    return texture


def _frame_to_scene(center, angle: float, scale: float, q, f: float) -> npt.NDArray[np.float64]:
    """T(center) R(angle) S(scale) P(q) T(-f): frame pixels into scene coordinates."""
    c, s = math.cos(angle) * scale, math.sin(angle) * scale
    rs = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    persp = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [q[0], q[1], 1.0]])
    to_center = np.array([[1.0, 0.0, -f], [0.0, 1.0, -f], [0.0, 0.0, 1.0]])
    place = np.array([[1.0, 0.0, center[0]], [0.0, 1.0, center[1]], [0.0, 0.0, 1.0]])
    return place @ rs @ persp @ to_center


def _reflect(value: float, lo: float, hi: float) -> float:
    while value < lo or value > hi:
        value = 2 * lo - value if value < lo else 2 * hi - value
    return value


def _walk(spec: TrajectorySpec, master_size: int, rng: np.random.Generator):
    fs = spec.frame_size
    reach = fs / 2.0 * math.sqrt(2.0) * SCALE_BOUNDS[1] + 2.0
    lo, hi = reach, master_size - reach
    center = np.array([master_size / 2.0, master_size / 2.0])
    angle, scale = 0.0, 1.0
    q = np.zeros(2)
    states = [(center.copy(), angle, scale, q.copy())]
    for _ in range(spec.n_frames - 1):
        d = rng.uniform(-1.0, 1.0, 5)
        center = center + spec.max_step_translation * d[:2]
        center = np.array([_reflect(v, lo, hi) for v in center])
        angle += math.radians(spec.max_step_rotation) * d[2]
        scale = _reflect(scale * (1.0 + spec.max_step_scale * d[3]), *SCALE_BOUNDS)
        q = rng.uniform(-spec.perspective_jitter, spec.perspective_jitter, 2) / fs
        states.append((center.copy(), angle, scale, q.copy()))
    return states


def generate_sequence(spec: TrajectorySpec) -> SyntheticSequence:
    """Render a frame sequence with exact ground-truth homographies."""
    fs = spec.frame_size
    master_size = MASTER_FACTOR * fs
    tex_seed, walk_seed, noise_seed = np.random.SeedSequence(spec.seed).spawn(3)
    master, stroke_map = _texture_with_strokes(master_size, np.random.default_rng(tex_seed))
    states = _walk(spec, master_size, np.random.default_rng(walk_seed))
    noise_rng = np.random.default_rng(noise_seed)

    f = (fs - 1) / 2.0
    fov = circular_mask(fs, fs, spec.fov_margin_fraction)
    c0 = states[0][0]
    frames, vessel_maps, labels, absolute = [], [], [], []
    for center, angle, scale, q in states:
        to_scene = Homography(_frame_to_scene(center, angle, scale, q, f))
        img, _ = remap(master, to_scene, fs, fs)
        if spec.noise_sigma > 0:
            img = np.clip(img + noise_rng.normal(0.0, spec.noise_sigma, img.shape), 0.0, 1.0)
        img[~fov] = 0.0
        frames.append(img)

        vessels, _ = remap(stroke_map, to_scene, fs, fs)
        vessel = (vessels > 0.5) & fov
        vessel_maps.append(vessel.astype(np.float64))
        labels.append(vessel.astype(np.uint8))

        # frame 0 sits at T(c0 - f) in the scene
        absolute.append(Homography(_frame_to_scene(center - c0 + f, angle, scale, q, f)))

    pairwise = [compose(invert(absolute[i + 1]), absolute[i]) for i in range(len(absolute) - 1)]
    absolute[0] = identity()
    logger.info("synthesized %d frames of %dx%d (seed %d)", len(frames), fs, fs, spec.seed)
    return SyntheticSequence(
        frames=frames,
        fov=fov,
        gt_pairwise=pairwise,
        gt_absolute=absolute,
        vessel_maps=vessel_maps,
        labels=labels,
        centers=np.array([s[0] for s in states]),
    )


GT_FILE = "gt_homographies.json"
MANIFEST_FILE = "manifest.json"


def _publish(staging: Path, root: Path) -> None:
    """Move every entry of ``staging`` into ``root``, replacing same-named entries."""
    root.mkdir(parents=True, exist_ok=True)
    for entry in sorted(staging.iterdir()):
        target = root / entry.name
        if target.is_dir() and not target.is_symlink():
            shutil.rmtree(target)
        elif target.exists() or target.is_symlink():
            target.unlink()
        entry.replace(target)


def write_synthetic(seq: SyntheticSequence, directory: str | Path, video_id: Optional[str] = None) -> Path:
    """Write a sequence in the dataset layout with ground truth and manifest.

    Everything is written and validated in a staging directory next to
    ``directory`` first; a failure leaves ``directory`` untouched.
    """
    root = Path(directory)
    video_id = video_id or root.resolve().name
    root.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix=f".{root.name}-", dir=root.parent) as tmp:
        staging = Path(tmp)
        dataset_io.write_sequence(staging, seq.frames, labels=seq.labels, fov=seq.fov, vessel_maps=seq.vessel_maps)
        dataset_io.write_homographies(
            staging / GT_FILE,
            dataset_io.homography_envelope(video_id, seq.gt_pairwise, absolute=seq.gt_absolute),
        )
        manifest = dataset_io.load_sequence(staging, expect_labels=True, video_id=video_id)
        dataset_io.export_manifest(manifest, staging / MANIFEST_FILE, relative_to=staging)
        _publish(staging, root)
    return root
