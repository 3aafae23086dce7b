"""Pydantic models for configuration and result records."""
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from .homography import Homography, Point2


# Configuration Models

class RegistrationConfig(BaseModel):
    """Parameters of the pyramidal Lucas-Kanade registration."""
    pyramid_levels: int = Field(4, ge=1, description="Number of pyramid levels")
    max_iterations_per_level: int = Field(50, ge=1, description="Gauss-Newton iteration cap per level")
    convergence_epsilon: float = Field(
        1e-3,
        gt=0,
        description="Stop when an update moves no frame corner further than this (px)",
    )
    parameterization: Literal["affine6", "projective8"] = Field(
        "affine6",
        description="Warp model: 6-parameter affine or 8-parameter homography",
    )
    min_valid_overlap_fraction: float = Field(
        0.25,
        gt=0,
        le=1,
        description="Smallest fraction of masked pixels that must stay valid",
    )

    model_config = {"frozen": True}


class TrajectorySpec(BaseModel):
    """Random-walk camera trajectory over a planar synthetic scene."""
    n_frames: int = Field(50, ge=2, description="Number of frames")
    frame_size: int = Field(448, ge=32, description="Square frame side (px)")
    max_step_translation: float = Field(4.0, ge=0, description="px per frame")
    max_step_rotation: float = Field(1.0, ge=0, description="degrees per frame")
    max_step_scale: float = Field(0.01, ge=0, description="relative scale change per frame")
    perspective_jitter: float = Field(0.0, ge=0, description="row-3 magnitude per frame, relative to the frame size")
    noise_sigma: float = Field(0.0, ge=0, description="additive Gaussian noise, sample units")
    fov_margin_fraction: float = Field(0.0, ge=0, lt=0.5)
    seed: int = 0

    model_config = {"frozen": True}


class ConsistencyConfig(BaseModel):
    """Parameters of the smoothing and SSIM consistency metric."""
    smoothing_size: int = Field(9, ge=1, description="Odd side of the Gaussian smoothing kernel")
    smoothing_sigma: float = Field(2.0, gt=0)
    overlap_threshold: float = Field(0.25, ge=0, le=1, description="Pairs below this overlap fail")
    ssim_sigma: float = Field(1.5, gt=0, description="Gaussian window of the SSIM statistics")
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = Field(1.0, gt=0)
    erode_overlap: bool = Field(
        False,
        description="Average SSIM only where the whole window lies inside the overlap",
    )

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _odd_kernel(self):
        if self.smoothing_size % 2 != 1:
            raise ValueError("smoothing_size must be odd")
        return self


# Result Models

class RegistrationResult(BaseModel):
    """Outcome of registering one moving frame onto a fixed frame."""
    h: Homography = Field(description="Maps moving-frame coordinates into fixed-frame coordinates")
    final_residual: float = Field(ge=0, description="Mean squared photometric error at full resolution")
    iterations_used: tuple[int, ...] = Field(description="Iterations per pyramid level, level 0 first")
    converged: bool
    history: tuple[tuple[float, ...], ...] = Field(
        (),
        description="Accepted residuals per pyramid level, level 0 first",
    )
    failure_reason: Optional[str] = None

    model_config = {"frozen": True, "arbitrary_types_allowed": True}


class MosaicLayout(BaseModel):
    """Placement of every frame on a common canvas."""
    anchor_index: int = Field(ge=0)
    per_frame_to_canvas: tuple[Homography, ...]
    canvas_width: int = Field(ge=1)
    canvas_height: int = Field(ge=1)
    offset: Point2 = Field(description="Canvas origin in anchor coordinates")
    frame_width: int = Field(ge=1)
    frame_height: int = Field(ge=1)
    excluded: tuple[int, ...] = Field((), description="Frames dropped by the canvas cap")

    model_config = {"frozen": True, "arbitrary_types_allowed": True}

    @property
    def frame_count(self) -> int:
        return len(self.per_frame_to_canvas)


class DriftRow(BaseModel):
    """Corner reprojection error of one frame against ground truth."""
    frame_index: int
    corner_error_px: Optional[float] = None


class PairSpec(BaseModel):
    """Source and target frame of a consistency pair."""
    source_index: int = Field(ge=0)
    target_index: int = Field(ge=0)

    model_config = {"frozen": True}

    @property
    def gap(self) -> int:
        return self.target_index - self.source_index

    @model_validator(mode="after")
    def _forward(self):
        if self.target_index - self.source_index < 1:
            raise ValueError("target_index must exceed source_index")
        return self


class CropBox(BaseModel):
    """Half-open pixel rectangle in target coordinates."""
    x0: int
    y0: int
    x1: int
    y1: int

    model_config = {"frozen": True}

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


class ConsistencyOutcome(BaseModel):
    """Consistency of one warped source against its target."""
    status: Literal["scored", "failed_low_overlap"]
    ssim: Optional[float] = Field(None, ge=-1, le=1)
    overlap_fraction: float = Field(ge=0, le=1)
    crop: Optional[CropBox] = None

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _status_fields(self):
        if self.status == "scored" and self.ssim is None:
            raise ValueError("a scored outcome needs an ssim value")
        if self.status == "failed_low_overlap" and self.ssim is not None:
            raise ValueError("a failed outcome carries no ssim value")
        return self


class ConsistencySummary(BaseModel):
    scored: int
    failed: int
    mean_ssim: Optional[float] = None


class ConfusionCounts(BaseModel):
    """Per-class true positive, false positive and false negative pixel counts."""
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]

    model_config = {"frozen": True}

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=tuple(a + b for a, b in zip(self.tp, other.tp)),
            fp=tuple(a + b for a, b in zip(self.fp, other.fp)),
            fn=tuple(a + b for a, b in zip(self.fn, other.fn)),
        )


class FrameCounts(BaseModel):
    """Confusion counts of one frame with its grouping labels."""
    video_id: str
    fold_id: Optional[int] = None
    counts: ConfusionCounts


class IoURow(BaseModel):
    """One row of the segmentation table."""
    level: Literal["video", "fold", "overall", "class"]
    group: str
    frames: int
    class_iou: tuple[Optional[float], ...]
    overall: Optional[float] = None


class ClassOccurrence(BaseModel):
    """Frames containing each class and average pixels per frame."""
    frames_with_class: tuple[int, ...]
    mean_pixels: tuple[float, ...]
    frame_count: int


# Dataset Models

class VideoInfo(BaseModel):
    """Catalog entry of one challenge video."""
    video_id: str
    resolution: int = Field(description="Square frame side (px)")
    labelled_frames: int
    unlabelled_clip_frames: int

    model_config = {"frozen": True}


class SequenceManifest(BaseModel):
    """Frames (and optional labels) of one video clip."""
    video_id: str
    resolution: tuple[int, int] = Field(description="(width, height) in pixels")
    frame_paths: tuple[str, ...] = Field(min_length=1)
    label_paths: Optional[tuple[str, ...]] = None
    fov_margin_fraction: float = Field(0.0, ge=0, lt=0.5)
    fov_path: Optional[str] = Field(None, description="Stored FOV mask; None means the inscribed circle")

    model_config = {"frozen": True}

    @property
    def frame_count(self) -> int:
        return len(self.frame_paths)


class HomographyFile(BaseModel):
    """JSON envelope of a homography sequence; each entry is row-major."""
    video_id: str
    frame_count: int = Field(ge=1)
    pairwise: list[list[float]]
    converged: Optional[list[bool]] = None
    absolute: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _shapes(self):
        for row in self.pairwise + (self.absolute or []):
            if len(row) != 9:
                raise ValueError(f"homography entries need 9 numbers; got {len(row)}")
        if self.converged is not None and len(self.converged) != len(self.pairwise):
            raise ValueError("converged flags must match the pairwise entries")
        return self


class FoldConfig(BaseModel):
    """Assignment of video ids to cross-validation folds."""
    assignments: dict[str, int]

    model_config = {"frozen": True}

    def folds(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for vid, fold in sorted(self.assignments.items()):
            out.setdefault(fold, []).append(vid)
        return dict(sorted(out.items()))

    def fold_of(self, video_id: str) -> Optional[int]:
        return self.assignments.get(video_id)
