import json
from pathlib import Path

import numpy as np
import pydantic
import pytest
from PIL import Image as PILImage

from fetmosaic.dataset_io import (
    VIDEO_CATALOG,
    default_fold_config,
    discover_videos,
    export_manifest,
    fold_image_counts,
    homography_envelope,
    load_fov,
    load_fold_config,
    load_frames,
    load_labels,
    load_sequence,
    pairwise_from_file,
    parse_fold_config,
    read_homographies,
    read_label,
    to_probability_map,
    write_homographies,
    write_label,
    write_sequence,
)
from fetmosaic.errors import (
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
from fetmosaic.homography import identity, translation
from fetmosaic.warp import circular_mask


def make_frames(n=3, size=32, seed=0):
    rng = np.random.default_rng(seed)
    return [np.round(rng.uniform(size=(size, size)) * 255) / 255 for _ in range(n)]


def make_labels(n=3, size=32, seed=1):
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 4, (size, size)).astype(np.uint8) for _ in range(n)]


# --- sequences ---

def test_load_written_sequence(tmp_path):
    frames, labels = make_frames(), make_labels()
    write_sequence(tmp_path / "Video999", frames, labels)
    manifest = load_sequence(tmp_path / "Video999", expect_labels=True)
    assert manifest.video_id == "Video999"
    assert manifest.frame_count == 3
    assert manifest.resolution == (32, 32)
    assert [Path(p).name for p in manifest.frame_paths] == ["000000.png", "000001.png", "000002.png"]
    for got, want in zip(load_frames(manifest), frames):
        np.testing.assert_allclose(got, want, atol=1e-12)
    for got, want in zip(load_labels(manifest), labels):
        np.testing.assert_array_equal(got, want)


def test_default_fov_is_inscribed_circle(tmp_path):
    write_sequence(tmp_path, make_frames())
    manifest = load_sequence(tmp_path, fov_margin_fraction=0.1)
    assert manifest.fov_path is None
    np.testing.assert_array_equal(load_fov(manifest), circular_mask(32, 32, 0.1))


def test_stored_fov_is_used(tmp_path):
    fov = np.zeros((32, 32), dtype=bool)
    fov[4:20, 4:20] = True
    write_sequence(tmp_path, make_frames(), fov=fov)
    np.testing.assert_array_equal(load_fov(load_sequence(tmp_path)), fov)


def test_rgb_frames_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    frame = np.round(rng.uniform(size=(16, 16, 3)) * 255) / 255
    write_sequence(tmp_path, [frame])
    (got,) = load_frames(load_sequence(tmp_path))
    assert got.shape == (16, 16, 3)
    np.testing.assert_allclose(got, frame, atol=1e-12)


def test_illegal_label_value(tmp_path):
    write_sequence(tmp_path, make_frames(1), make_labels(1))
    label = np.zeros((32, 32), dtype=np.uint8)
    label[5, 5] = 7
    PILImage.fromarray(label).save(tmp_path / "labels" / "000000.png")
    with pytest.raises(IllegalLabelValue) as info:
        load_sequence(tmp_path, expect_labels=True)
    assert info.value.value == 7


def test_palette_label_keeps_indices(tmp_path):
    im = PILImage.fromarray(np.array([[0, 1], [2, 3]], dtype=np.uint8))
    im.putpalette([0, 0, 0, 255, 0, 0, 0, 0, 255, 0, 255, 0])
    im.save(tmp_path / "palette.png")
    with PILImage.open(tmp_path / "palette.png") as back:
        assert back.mode == "P"
    np.testing.assert_array_equal(read_label(tmp_path / "palette.png"), [[0, 1], [2, 3]])


def test_write_label_rejects_bad_values(tmp_path):
    with pytest.raises(IllegalLabelValue):
        write_label(tmp_path / "x.png", np.full((4, 4), 5))


def test_label_round_trip(tmp_path):
    label = make_labels(1, 16)[0]
    write_label(tmp_path / "l.png", label)
    np.testing.assert_array_equal(read_label(tmp_path / "l.png"), label)


def test_missing_directories(tmp_path):
    with pytest.raises(MissingDirectory):
        load_sequence(tmp_path)
    write_sequence(tmp_path, make_frames(1))
    with pytest.raises(MissingDirectory):
        load_sequence(tmp_path, expect_labels=True)


def test_empty_images_directory(tmp_path):
    (tmp_path / "images").mkdir()
    with pytest.raises(EmptyInput):
        load_sequence(tmp_path)


def test_label_count_mismatch(tmp_path):
    write_sequence(tmp_path, make_frames(3), make_labels(3))
    (tmp_path / "labels" / "000002.png").unlink()
    with pytest.raises(LengthMismatch):
        load_sequence(tmp_path, expect_labels=True)


def test_mixed_and_non_square_sizes(tmp_path):
    write_sequence(tmp_path / "a", [np.zeros((32, 32)), np.zeros((16, 16))])
    with pytest.raises(ResolutionMismatch):
        load_sequence(tmp_path / "a")
    write_sequence(tmp_path / "b", [np.zeros((16, 32))])
    with pytest.raises(ResolutionMismatch):
        load_sequence(tmp_path / "b")


def test_strict_catalog_resolution(tmp_path):
    write_sequence(tmp_path / "Video001", make_frames(1))
    assert load_sequence(tmp_path / "Video001").resolution == (32, 32)
    with pytest.raises(ResolutionMismatch):
        load_sequence(tmp_path / "Video001", strict_catalog=True)


@pytest.mark.slow
def test_catalog_sized_video(tmp_path):
    info = VIDEO_CATALOG["Video001"]
    size = info.resolution
    frame = np.zeros((size, size))
    label = np.zeros((size, size), dtype=np.uint8)
    write_sequence(tmp_path / "Video001", [frame] * info.labelled_frames, [label] * info.labelled_frames)
    manifest = load_sequence(tmp_path / "Video001", expect_labels=True, strict_catalog=True)
    assert manifest.frame_count == 152
    assert manifest.resolution == (470, 470)


def test_export_manifest_relative(tmp_path):
    write_sequence(tmp_path, make_frames(2), make_labels(2), fov=circular_mask(32, 32))
    manifest = load_sequence(tmp_path, expect_labels=True, video_id="V")
    export_manifest(manifest, tmp_path / "manifest.json", relative_to=tmp_path)
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["frame_paths"] == ["images/000000.png", "images/000001.png"]
    assert data["label_paths"] == ["labels/000000.png", "labels/000001.png"]
    assert data["fov_path"] == "fov.png"


def test_discover_videos(tmp_path):
    for name in ("Video002", "Video001"):
        write_sequence(tmp_path / name, make_frames(1))
    (tmp_path / "notes").mkdir()
    assert [p.name for p in discover_videos(tmp_path)] == ["Video001", "Video002"]


def test_probability_maps():
    label = np.array([[0, 1], [2, 1]])
    np.testing.assert_array_equal(to_probability_map(label, 1), [[0.0, 1.0], [0.0, 1.0]])
    total = sum(to_probability_map(label, c) for c in range(4))
    np.testing.assert_array_equal(total, np.ones((2, 2)))
    with pytest.raises(InvalidArgument):
        to_probability_map(label, 4)


# --- homography files ---

def test_homography_file_round_trip(tmp_path):
    hs = [translation(1.5, 0.0), translation(0.0, -2.0)]
    env = homography_envelope("V", hs, converged=[True, False])
    write_homographies(tmp_path / "h.json", env)
    back = read_homographies(tmp_path / "h.json")
    assert back.frame_count == 3
    assert pairwise_from_file(back) == [hs[0], identity()]
    assert pairwise_from_file(back, use_converged=False)[1].allclose(hs[1])
    assert "absolute" not in json.loads((tmp_path / "h.json").read_text())


def test_homography_file_validation(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"video_id": "V", "frame_count": 2, "pairwise": [[1, 0, 0]]}))
    with pytest.raises(pydantic.ValidationError):
        read_homographies(path)


# --- folds ---

def test_default_folds():
    cfg = default_fold_config()
    folds = cfg.folds()
    assert sorted(folds) == [1, 2, 3, 4, 5, 6]
    assert all(len(v) == 3 for v in folds.values())
    assert set(cfg.assignments) == set(VIDEO_CATALOG)
    assert load_fold_config() == cfg


def test_fold_image_counts():
    assert fold_image_counts() == {1: 352, 2: 353, 3: 349, 4: 327, 5: 350, 6: 329}
    assert sum(fold_image_counts().values()) == sum(v.labelled_frames for v in VIDEO_CATALOG.values())


def fold_text(skip=None, extra=None):
    lines = [f"{vid} {fold}" for vid, fold in default_fold_config().assignments.items() if vid != skip]
    if extra:
        lines.append(extra)
    return "# video fold\n" + "\n".join(lines) + "\n"


def test_parse_fold_config_round_trip(tmp_path):
    path = tmp_path / "folds.txt"
    path.write_text(fold_text())
    assert load_fold_config(path) == default_fold_config()


def test_fold_config_missing_video():
    with pytest.raises(IncompleteAssignment):
        parse_fold_config(fold_text(skip="Video023"))


def test_fold_config_four_videos_in_a_fold():
    text = fold_text(skip="Video023").replace("Video022 5", "Video022 5\nVideo023 5")
    with pytest.raises(FoldSizeViolation):
        parse_fold_config(text)


def test_fold_config_unknown_video_and_bad_lines():
    with pytest.raises(FoldConfigError):
        parse_fold_config(fold_text(extra="Video999 1"))
    with pytest.raises(FoldConfigError):
        parse_fold_config("Video001\n")
    with pytest.raises(FoldConfigError):
        parse_fold_config("Video001 one\n")


