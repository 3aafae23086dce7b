"""On-disk sequence layout, the video catalog and the cross-validation folds.

A sequence directory looks like::

    <dir>/images/000000.png ...     8-bit frames, lexicographic order
    <dir>/labels/000000.png ...     optional, single-channel class ids 0..3
    <dir>/vessel_maps/000000.png    optional, binary vessel maps
    <dir>/fov.png                   optional, binary field-of-view mask

Without ``fov.png`` the field of view is the circle inscribed in the frame.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from PIL import Image as PILImage

from .errors import (
    EmptyInput,
    FoldConfigError,
    FoldSizeViolation,
    IllegalLabelValue,
    IncompleteAssignment,
    InvalidArgument,
    LengthMismatch,
    MissingDirectory,
    ResolutionMismatch,
)
from .homography import Homography, identity
from .models import FoldConfig, HomographyFile, SequenceManifest, VideoInfo
from .warp import FovMask, Image, as_image, circular_mask

logger = logging.getLogger(__name__)

IMAGES_DIR = "images"
LABELS_DIR = "labels"
VESSEL_DIR = "vessel_maps"
FOV_FILE = "fov.png"
N_CLASSES = 4
VIDEOS_PER_FOLD = 3


def _info(video_id: str, resolution: int, labelled: int, unlabelled: int) -> VideoInfo:
    return VideoInfo(video_id=video_id, resolution=resolution, labelled_frames=labelled, unlabelled_clip_frames=unlabelled)


VIDEO_CATALOG: dict[str, VideoInfo] = {
    v.video_id: v
    for v in (
        _info("Video001", 470, 152, 346),
        _info("Video002", 540, 153, 259),
        _info("Video003", 550, 117, 541),
        _info("Video004", 480, 100, 388),
        _info("Video005", 500, 100, 722),
        _info("Video006", 450, 100, 452),
        _info("Video007", 640, 140, 316),
        _info("Video008", 720, 110, 295),
        _info("Video009", 660, 105, 265),
        _info("Video011", 380, 100, 424),
        _info("Video013", 680, 124, 247),
        _info("Video014", 720, 110, 469),
        _info("Video016", 380, 100, 593),
        _info("Video017", 400, 100, 490),
        _info("Video018", 400, 100, 352),
        _info("Video019", 720, 149, 265),
        _info("Video022", 400, 100, 348),
        _info("Video023", 320, 100, 639),
    )
}

DEFAULT_FOLDS: dict[int, tuple[str, ...]] = {
    1: ("Video001", "Video006", "Video016"),
    2: ("Video002", "Video011", "Video018"),
    3: ("Video004", "Video019", "Video023"),
    4: ("Video003", "Video005", "Video014"),
    5: ("Video007", "Video008", "Video022"),
    6: ("Video009", "Video013", "Video017"),
}


def catalog_entry(video_id: str) -> Optional[VideoInfo]:
    return VIDEO_CATALOG.get(video_id)


# --- pixel files ---

def read_image(path: str | Path) -> Image:
    """8-bit frame as floats in [0, 1]; grayscale stays 2D, anything else becomes RGB."""
    with PILImage.open(path) as im:
        im = im.convert("L") if im.mode in ("L", "1") else im.convert("RGB")
        return np.asarray(im, dtype=np.float64) / 255.0


def write_image(path: str | Path, img: npt.ArrayLike) -> None:
    arr = as_image(img)
    data = np.round(arr * 255.0).astype(np.uint8)
    PILImage.fromarray(data).save(path)


def read_label(path: str | Path) -> npt.NDArray[np.uint8]:
    """Class-id mask. Palette PNGs keep their indices as class ids.

    Raises:
        IllegalLabelValue: on any value outside 0..3
    """
    with PILImage.open(path) as im:
        if im.mode not in ("L", "P"):
            im = im.convert("L")
        data = np.asarray(im, dtype=np.uint8)
    bad = data[data >= N_CLASSES]
    if bad.size:
        raise IllegalLabelValue(path, int(bad.max()))
    return data


def write_label(path: str | Path, label: npt.ArrayLike) -> None:
    data = np.asarray(label)
    if data.size and (data.min() < 0 or data.max() >= N_CLASSES):
        raise IllegalLabelValue(path, int(data.max() if data.max() >= N_CLASSES else data.min()))
    PILImage.fromarray(data.astype(np.uint8)).save(path)


def read_mask(path: str | Path) -> FovMask:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def write_mask(path: str | Path, mask: npt.ArrayLike) -> None:
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    PILImage.fromarray(data).save(path)


def to_probability_map(label: npt.ArrayLike, class_id: int) -> Image:
    """1.0 where ``label == class_id``, else 0.0."""
    if not 0 <= class_id < N_CLASSES:
        raise InvalidArgument(f"class_id must lie in 0..{N_CLASSES - 1}; got {class_id}")
    return (np.asarray(label) == class_id).astype(np.float64)


# --- sequences ---

def _png_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")


def load_sequence(
    directory: str | Path,
    expect_labels: bool = False,
    video_id: Optional[str] = None,
    fov_margin_fraction: float = 0.0,
    strict_catalog: bool = False,
) -> SequenceManifest:
    """Validate a sequence directory and describe it.

    Args:
        directory: sequence root holding ``images/`` (and ``labels/``)
        expect_labels: require a label file for every frame
        video_id: defaults to the directory name
        fov_margin_fraction: margin of the inscribed-circle FOV when no ``fov.png`` exists
        strict_catalog: check the resolution of catalog videos against the catalog

    Raises:
        MissingDirectory: if ``images/`` (or ``labels/`` when expected) is absent
        EmptyInput: if there are no frames
        ResolutionMismatch: on mixed, non-square or off-catalog frame sizes
        LengthMismatch: if label and frame counts differ
        IllegalLabelValue: if a label holds a value outside 0..3
    """
    root = Path(directory)
    images_dir = root / IMAGES_DIR
    if not images_dir.is_dir():
        raise MissingDirectory(f"{images_dir} does not exist")
    video_id = video_id or root.resolve().name

    frames = _png_files(images_dir)
    if not frames:
        raise EmptyInput(f"{images_dir} holds no PNG frames")
    sizes = set()
    for p in frames:
        with PILImage.open(p) as im:
            sizes.add(im.size)
    if len(sizes) != 1:
        raise ResolutionMismatch(f"{video_id}: frames have mixed sizes {sorted(sizes)}")
    width, height = sizes.pop()
    if width != height:
        raise ResolutionMismatch(f"{video_id}: frames are {width}x{height}, expected square frames")
    entry = catalog_entry(video_id)
    if strict_catalog and entry is not None and entry.resolution != width:
        raise ResolutionMismatch(
            f"{video_id}: frames are {width}x{height}, the catalog lists {entry.resolution}x{entry.resolution}"
        )

    label_paths = None
    if expect_labels:
        labels_dir = root / LABELS_DIR
        if not labels_dir.is_dir():
            raise MissingDirectory(f"{labels_dir} does not exist")
        labels = _png_files(labels_dir)
        if len(labels) != len(frames):
            raise LengthMismatch(f"{video_id}: {len(labels)} labels for {len(frames)} frames")
        for p in labels:
            data = read_label(p)
            if data.shape != (height, width):
                raise ResolutionMismatch(f"{p}: label is {data.shape[1]}x{data.shape[0]}, frames are {width}x{height}")
        label_paths = tuple(str(p) for p in labels)

    fov_file = root / FOV_FILE
    manifest = SequenceManifest(
        video_id=video_id,
        resolution=(width, height),
        frame_paths=tuple(str(p) for p in frames),
        label_paths=label_paths,
        fov_margin_fraction=fov_margin_fraction,
        fov_path=str(fov_file) if fov_file.is_file() else None,
    )
    logger.info("loaded %s: %d frames at %dx%d", video_id, manifest.frame_count, width, height)
    return manifest


def load_frames(manifest: SequenceManifest) -> list[Image]:
    return [read_image(p) for p in manifest.frame_paths]


def load_labels(manifest: SequenceManifest) -> list[npt.NDArray[np.uint8]]:
    if manifest.label_paths is None:
        raise MissingDirectory(f"{manifest.video_id} was loaded without labels")
    return [read_label(p) for p in manifest.label_paths]


def load_fov(manifest: SequenceManifest) -> FovMask:
    """Stored FOV mask, or the inscribed circle with the manifest's margin."""
    width, height = manifest.resolution
    if manifest.fov_path is None:
        return circular_mask(width, height, manifest.fov_margin_fraction)
    mask = read_mask(manifest.fov_path)
    if mask.shape != (height, width):
        raise ResolutionMismatch(f"{manifest.fov_path}: mask size differs from the frames")
    return mask


def load_vessel_maps(directory: str | Path) -> list[Image]:
    vessel_dir = Path(directory) / VESSEL_DIR
    if not vessel_dir.is_dir():
        raise MissingDirectory(f"{vessel_dir} does not exist")
    return [read_image(p) for p in _png_files(vessel_dir)]


def frame_name(index: int) -> str:
    return f"{index:06d}.png"


def write_sequence(
    directory: str | Path,
    frames: Sequence[npt.ArrayLike],
    labels: Optional[Sequence[npt.ArrayLike]] = None,
    fov: Optional[npt.ArrayLike] = None,
    vessel_maps: Optional[Sequence[npt.ArrayLike]] = None,
) -> Path:
    """Write frames (and optional labels, vessel maps and FOV) in the sequence layout."""
    root = Path(directory)
    if labels is not None and len(labels) != len(frames):
        raise LengthMismatch(f"{len(labels)} labels for {len(frames)} frames")
    (root / IMAGES_DIR).mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_image(root / IMAGES_DIR / frame_name(i), frame)
    if labels is not None:
        (root / LABELS_DIR).mkdir(exist_ok=True)
        for i, label in enumerate(labels):
            write_label(root / LABELS_DIR / frame_name(i), label)
    if vessel_maps is not None:
        (root / VESSEL_DIR).mkdir(exist_ok=True)
        for i, vm in enumerate(vessel_maps):
            write_image(root / VESSEL_DIR / frame_name(i), vm)
    if fov is not None:
        write_mask(root / FOV_FILE, fov)
    return root


def export_manifest(manifest: SequenceManifest, path: str | Path, relative_to: Optional[str | Path] = None) -> None:
    """Write the manifest as JSON, with paths relative to ``relative_to`` when given."""
    if relative_to is not None:
        base = Path(relative_to)

        def rel(p: str) -> str:
            return Path(p).relative_to(base).as_posix()

        manifest = manifest.model_copy(update={
            "frame_paths": tuple(rel(p) for p in manifest.frame_paths),
            "label_paths": tuple(rel(p) for p in manifest.label_paths) if manifest.label_paths else None,
            "fov_path": rel(manifest.fov_path) if manifest.fov_path else None,
        })
    Path(path).write_text(manifest.model_dump_json(indent=2) + "\n")


# --- homography files ---

def homography_envelope(
    video_id: str,
    pairwise: Sequence[Homography],
    converged: Optional[Sequence[bool]] = None,
    absolute: Optional[Sequence[Homography]] = None,
) -> HomographyFile:
    return HomographyFile(
        video_id=video_id,
        frame_count=len(pairwise) + 1,
        pairwise=[h.to_list() for h in pairwise],
        converged=list(converged) if converged is not None else None,
        absolute=[h.to_list() for h in absolute] if absolute is not None else None,
    )


def write_homographies(path: str | Path, envelope: HomographyFile) -> None:
    Path(path).write_text(envelope.model_dump_json(indent=2, exclude_none=True) + "\n")


def read_homographies(path: str | Path) -> HomographyFile:
    """Parse a homography JSON file; invalid content raises ``pydantic.ValidationError``."""
    return HomographyFile.model_validate_json(Path(path).read_text())


def pairwise_from_file(envelope: HomographyFile, use_converged: bool = True) -> list[Homography]:
    """Pairwise homographies; entries flagged as not converged become the identity."""
    hs = [Homography.from_list(v) for v in envelope.pairwise]
    if use_converged and envelope.converged is not None:
        hs = [h if ok else identity() for h, ok in zip(hs, envelope.converged)]
    return hs


def discover_videos(root: str | Path) -> list[Path]:
    """Sub-directories of ``root`` that hold an ``images/`` directory, sorted by name."""
    root = Path(root)
    if not root.is_dir():
        raise MissingDirectory(f"{root} does not exist")
    return sorted(p for p in root.iterdir() if (p / IMAGES_DIR).is_dir())


# --- folds ---

def default_fold_config() -> FoldConfig:
    return FoldConfig(assignments={vid: fold for fold, vids in DEFAULT_FOLDS.items() for vid in vids})


def validate_folds(cfg: FoldConfig) -> FoldConfig:
    """Every catalog video in exactly one of six folds of three.

    Raises:
        IncompleteAssignment: if a catalog video has no fold
        FoldConfigError: if an unknown video or fold id appears
        FoldSizeViolation: if a fold does not hold three videos
    """
    unknown = sorted(set(cfg.assignments) - set(VIDEO_CATALOG))
    if unknown:
        raise FoldConfigError(f"videos not in the catalog: {', '.join(unknown)}")
    missing = sorted(set(VIDEO_CATALOG) - set(cfg.assignments))
    if missing:
        raise IncompleteAssignment(f"videos without a fold: {', '.join(missing)}")
    bad_ids = sorted({f for f in cfg.assignments.values() if not 1 <= f <= len(DEFAULT_FOLDS)})
    if bad_ids:
        raise FoldConfigError(f"fold ids must lie in 1..{len(DEFAULT_FOLDS)}; got {bad_ids}")
    for fold, vids in cfg.folds().items():
        if len(vids) != VIDEOS_PER_FOLD:
            raise FoldSizeViolation(f"fold {fold} holds {len(vids)} videos, expected {VIDEOS_PER_FOLD}")
    return cfg


def parse_fold_config(text: str, source: str = "<string>") -> FoldConfig:
    """Parse ``video_id fold_id`` lines; blank lines and ``#`` comments are skipped."""
    assignments: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FoldConfigError(f"{source}:{lineno}: expected 'video_id fold_id', got {raw!r}")
        vid, fold = parts
        try:
            fold_id = int(fold)
        except ValueError as e:
            raise FoldConfigError(f"{source}:{lineno}: fold id {fold!r} is not an integer") from e
        if vid in assignments:
            raise FoldConfigError(f"{source}:{lineno}: {vid} is assigned twice")
        assignments[vid] = fold_id
    return validate_folds(FoldConfig(assignments=assignments))


def load_fold_config(path: Optional[str | Path] = None) -> FoldConfig:
    """Fold assignment from a text file, or the embedded default when ``path`` is None."""
    if path is None:
        return default_fold_config()
    return parse_fold_config(Path(path).read_text(), str(path))


def fold_image_counts(folds: Optional[FoldConfig] = None) -> dict[int, int]:
    """Labelled images per fold according to the catalog."""
    folds = folds or default_fold_config()
    return {fold: sum(VIDEO_CATALOG[v].labelled_frames for v in vids) for fold, vids in folds.folds().items()}
