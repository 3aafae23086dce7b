"""Pydantic models for command-line argument validation."""
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..models import ConsistencyConfig, RegistrationConfig, TrajectorySpec


class SynthRequest(BaseModel):
    """Arguments of ``fetmosaic synth``."""
    out: Path = Field(description="Sequence directory to create")
    video_id: Optional[str] = Field(None, description="Defaults to the output directory name")
    trajectory: TrajectorySpec


class RegisterRequest(BaseModel):
    """Arguments of ``fetmosaic register``."""
    input: Path
    out: Path = Field(description="Homography JSON to write")
    residuals: Path = Field(description="Per-pair CSV to write")
    substrate: Literal["frames", "vessel_maps"] = Field(
        "frames",
        description="Images to register: the frames or the stored vessel maps",
    )
    fov_margin: float = Field(0.0, ge=0, lt=0.5)
    registration: RegistrationConfig


class MosaicRequest(BaseModel):
    """Arguments of ``fetmosaic mosaic``."""
    input: Path
    homographies: Path
    out: Path = Field(description="Mosaic PNG to write")
    drift: Optional[Path] = Field(None, description="Drift CSV; written when ground truth is available")
    ground_truth: Optional[Path] = None
    anchor: int = Field(0, ge=0, description="Anchor frame, relative to --start")
    blend: Literal["overwrite_latest", "running_mean"] = "running_mean"
    start: int = Field(0, ge=0)
    stop: Optional[int] = Field(None, ge=1, description="One past the last frame used")
    fov_margin: float = Field(0.0, ge=0, lt=0.5)

    @model_validator(mode="after")
    def _range(self):
        if self.stop is not None and self.stop <= self.start:
            raise ValueError("--stop must exceed --start")
        return self


class ConsistencyRequest(BaseModel):
    """Arguments of ``fetmosaic eval-consistency``."""
    input: Path
    homographies: Path
    csv: Path
    svg: Optional[Path] = None
    gap: int = Field(5, ge=1, description="Frames between source and target")
    highlight: Optional[tuple[int, int]] = Field(None, description="Pair index range drawn in red")
    fov_margin: float = Field(0.0, ge=0, lt=0.5)
    consistency: ConsistencyConfig = ConsistencyConfig()

    @model_validator(mode="after")
    def _highlight(self):
        if self.highlight is not None and not 0 <= self.highlight[0] <= self.highlight[1]:
            raise ValueError("--highlight needs 0 <= START <= STOP")
        return self


class SegRequest(BaseModel):
    """Arguments of ``fetmosaic eval-seg``."""
    pred: Path
    gt: Path
    out: Path
    folds: Optional[Path] = Field(None, description="Fold file; the embedded assignment when omitted")
    pooling: Literal["frame_mean", "pixel_pooled"] = "frame_mean"
