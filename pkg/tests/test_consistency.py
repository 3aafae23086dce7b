import math

import numpy as np
import pytest

from fetmosaic.consistency import (
    consistency_score,
    gaussian_kernel,
    masked_ssim,
    overlap_region,
    score_chained,
    sequence_consistency,
    smooth,
    summarize,
)
from fetmosaic.errors import CropTooSmall, EmptyInput, InvalidArgument, LengthMismatch, TooFewFrames
from fetmosaic.homography import compose, identity, similarity, translation
from fetmosaic.models import ConsistencyConfig, ConsistencyOutcome, RegistrationResult, TrajectorySpec
from fetmosaic.synthetic import generate_sequence
from fetmosaic.warp import circular_mask, warp_image


def rect_fov(width=64, height=64, cols=48):
    fov = np.zeros((height, width), dtype=bool)
    fov[:, :cols] = True
    return fov


# --- smoothing ---

def test_kernel_is_normalized_and_symmetric():
    k = gaussian_kernel(9, 2.0)
    assert k.shape == (9,)
    assert k.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(k, k[::-1])
    assert k.argmax() == 4


def test_smoothing_an_impulse_gives_the_outer_product():
    img = np.zeros((32, 32))
    img[16, 16] = 1.0
    out = smooth(img)
    k = gaussian_kernel()
    assert out[16, 16] == pytest.approx(k[4] ** 2, abs=1e-12)
    np.testing.assert_allclose(out[12:21, 12:21], np.outer(k, k), atol=1e-12)


def test_smoothing_keeps_constants():
    np.testing.assert_allclose(smooth(np.full((20, 20), 0.3)), 0.3, atol=1e-12)


def test_config_needs_odd_kernel():
    with pytest.raises(ValueError):
        ConsistencyConfig(smoothing_size=8)


# --- overlap ---

def test_overlap_identity_is_full():
    fov = circular_mask(64, 64)
    overlap, fraction = overlap_region(identity(), fov)
    assert fraction == 1.0
    np.testing.assert_array_equal(overlap, fov)


def test_overlap_disjoint_is_zero():
    _, fraction = overlap_region(translation(200, 0), circular_mask(64, 64))
    assert fraction == 0.0


def test_overlap_of_circles_one_radius_apart():
    _, fraction = overlap_region(translation(100, 0), circular_mask(200, 200))
    lens = (2.0 / math.pi) * (math.acos(0.5) - 0.5 * math.sqrt(0.75))
    assert fraction == pytest.approx(lens, abs=0.01)


def test_overlap_empty_fov():
    with pytest.raises(EmptyInput):
        overlap_region(identity(), np.zeros((8, 8), dtype=bool))


def test_quarter_overlap_is_scored_and_just_below_fails():
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(64, 64))
    fov = rect_fov()
    at = consistency_score(img, img, translation(36, 0), fov)
    assert at.overlap_fraction == 0.25
    assert at.status == "scored"
    below = consistency_score(img, img, translation(37, 0), fov)
    assert below.status == "failed_low_overlap"
    assert below.ssim is None
    assert below.crop is None


# --- SSIM ---

def test_self_consistency_is_one(frame_pair, fov128):
    fixed, _ = frame_pair
    outcome = consistency_score(fixed, fixed, identity(), fov128)
    assert outcome.status == "scored"
    assert outcome.ssim == pytest.approx(1.0, abs=1e-9)
    assert outcome.overlap_fraction == 1.0


def test_crop_is_overlap_bounding_box(frame_pair):
    fixed, _ = frame_pair
    fov = rect_fov(128, 128, 100)
    outcome = consistency_score(fixed, fixed, translation(20, 0), fov)
    assert (outcome.crop.x0, outcome.crop.x1) == (20, 100)
    assert (outcome.crop.y0, outcome.crop.y1) == (0, 128)


def test_masked_ssim_is_symmetric(frame_pair):
    fixed, moving = frame_pair
    mask = np.ones(fixed.shape, dtype=bool)
    assert masked_ssim(fixed, moving, mask) == pytest.approx(masked_ssim(moving, fixed, mask), abs=1e-12)


def test_noise_lowers_consistency(frame_pair, fov128):
    fixed, _ = frame_pair
    rng = np.random.default_rng(5)
    noisy = fixed.copy()
    salt = rng.uniform(size=fixed.shape) < 0.2
    noisy[salt] = rng.uniform(size=int(salt.sum()))
    clean = consistency_score(fixed, fixed, identity(), fov128).ssim
    dirty = consistency_score(noisy, fixed, identity(), fov128).ssim
    assert dirty < clean
    assert -1.0 <= dirty <= 1.0


def test_sparse_salt_barely_moves_the_score(frame_pair, fov128):
    fixed, _ = frame_pair
    rng = np.random.default_rng(8)
    salted = fixed.copy()
    salted[rng.uniform(size=fixed.shape) < 0.002] = 1.0
    clean = consistency_score(fixed, fixed, identity(), fov128).ssim
    dirty = consistency_score(salted, fixed, identity(), fov128).ssim
    assert abs(clean - dirty) < 0.02


def test_correct_homography_beats_wrong_one(frame_pair, fov128):
    fixed, moving = frame_pair
    right = consistency_score(moving, fixed, translation(4, -3), fov128).ssim
    wrong = consistency_score(moving, fixed, identity(), fov128).ssim
    assert right > 0.95
    assert right > wrong


def test_ssim_is_averaged_over_the_whole_overlap(frame_pair, fov128):
    fixed, moving = frame_pair
    h = translation(3, -2)
    outcome = consistency_score(moving, fixed, h, fov128)
    overlap, _ = overlap_region(h, fov128)
    warped, _ = warp_image(smooth(moving), h, 128, 128)
    rows, cols = slice(outcome.crop.y0, outcome.crop.y1), slice(outcome.crop.x0, outcome.crop.x1)
    expected = masked_ssim(warped[rows, cols], smooth(fixed)[rows, cols], overlap[rows, cols])
    assert outcome.ssim == pytest.approx(expected, abs=1e-12)

    eroded = consistency_score(moving, fixed, h, fov128, ConsistencyConfig(erode_overlap=True))
    assert eroded.crop == outcome.crop
    assert eroded.ssim != pytest.approx(outcome.ssim, abs=1e-9)


def test_rgb_consistency(frame_pair, fov128):
    fixed, _ = frame_pair
    rgb = np.stack([fixed, fixed * 0.5, 1.0 - fixed], axis=-1)
    assert consistency_score(rgb, rgb, identity(), fov128).ssim == pytest.approx(1.0, abs=1e-9)


def test_crop_smaller_than_window():
    img = np.zeros((8, 8))
    with pytest.raises(CropTooSmall):
        masked_ssim(img, img, np.ones((8, 8), dtype=bool))


# --- sequences ---

def test_chained_pairs_count_and_indices(small_sequence):
    seq = small_sequence
    results = score_chained(seq.frames, seq.gt_pairwise, 3, seq.fov, threads=2)
    assert len(results) == 7
    assert [(p.source_index, p.target_index) for p, _ in results] == [(i, i + 3) for i in range(7)]
    assert all(o.status == "scored" for _, o in results)
    assert min(o.ssim for _, o in results) > 0.8


def test_sequence_consistency_uses_effective_homographies(small_sequence):
    seq = small_sequence
    truth = [
        RegistrationResult(h=h, final_residual=0.0, iterations_used=(1,), converged=True) for h in seq.gt_pairwise
    ]
    failed = [r.model_copy(update={"converged": False}) for r in truth]
    good = summarize([o for _, o in sequence_consistency(seq.frames, truth, 1, seq.fov, threads=1)])
    bad = summarize([o for _, o in sequence_consistency(seq.frames, failed, 1, seq.fov, threads=1)])
    assert good.scored == bad.scored == 9
    assert good.mean_ssim > bad.mean_ssim


def test_gap_validation(small_sequence):
    seq = small_sequence
    with pytest.raises(InvalidArgument):
        score_chained(seq.frames, seq.gt_pairwise, 0, seq.fov)
    with pytest.raises(TooFewFrames):
        score_chained(seq.frames, seq.gt_pairwise, 10, seq.fov)
    with pytest.raises(LengthMismatch):
        score_chained(seq.frames, seq.gt_pairwise[:-1], 1, seq.fov)


def test_summary_counts():
    outcomes = [
        ConsistencyOutcome(status="scored", ssim=0.5, overlap_fraction=0.9),
        ConsistencyOutcome(status="scored", ssim=0.7, overlap_fraction=0.9),
        ConsistencyOutcome(status="failed_low_overlap", overlap_fraction=0.1),
    ]
    summary = summarize(outcomes)
    assert (summary.scored, summary.failed) == (2, 1)
    assert summary.mean_ssim == pytest.approx(0.6)
    assert summarize(outcomes[2:]).mean_ssim is None


def test_ground_truth_beats_scale_biased_homographies():
    spec = TrajectorySpec(
        n_frames=20, frame_size=96, max_step_translation=1.5, max_step_rotation=0.5, max_step_scale=0.005, seed=4
    )
    seq = generate_sequence(spec)
    bias = similarity(scale=1.02, center=(47.5, 47.5))
    biased = [compose(bias, h) for h in seq.gt_pairwise]
    truth = score_chained(seq.frames, seq.gt_pairwise, 5, seq.fov, threads=2)
    wrong = score_chained(seq.frames, biased, 5, seq.fov, threads=2)
    pairs = [(a.ssim, b.ssim) for (_, a), (_, b) in zip(truth, wrong) if a.status == b.status == "scored"]
    assert len(pairs) >= 12
    wins = sum(a > b for a, b in pairs)
    assert wins >= 0.9 * len(pairs)
