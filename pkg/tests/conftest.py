"""Shared fixtures: textured scenes, small synthetic sequences and a clean environment."""
from __future__ import annotations

import numpy as np
import pytest

from fetmosaic.config import reset_settings
from fetmosaic.homography import Homography, translation
from fetmosaic.models import TrajectorySpec
from fetmosaic.synthetic import generate_sequence, generate_texture
from fetmosaic.warp import circular_mask, remap


@pytest.fixture(autouse=True)
def _clean_settings(monkeypatch):
    for var in ("FETMOSAIC_THREADS", "FETMOSAIC_LOG_LEVEL", "FETMOSAIC_CANVAS_MAX"):
        monkeypatch.delenv(var, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture(scope="session")
def scene() -> np.ndarray:
    """192x192 textured master image."""
    return generate_texture(192, seed=3)


@pytest.fixture(scope="session")
def crop(scene):
    """Cut a frame whose pixel p shows scene point h(p)."""

    def _crop(h: Homography, size: int = 128) -> np.ndarray:
        img, inside = remap(scene, h, size, size)
        assert inside.all()
        return img

    return _crop


@pytest.fixture(scope="session")
def frame_pair(crop):
    """Fixed and moving 128x128 frames with moving -> fixed = translation(4, -3)."""
    moving = crop(translation(32, 32))
    fixed = crop(translation(28, 35))
    return fixed, moving


@pytest.fixture(scope="session")
def fov128() -> np.ndarray:
    return circular_mask(128, 128)


@pytest.fixture(scope="session")
def small_sequence():
    """Ten 96x96 frames with gentle similarity motion."""
    spec = TrajectorySpec(
        n_frames=10,
        frame_size=96,
        max_step_translation=1.5,
        max_step_rotation=0.5,
        max_step_scale=0.005,
        seed=11,
    )
    return generate_sequence(spec)
