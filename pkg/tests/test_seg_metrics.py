import numpy as np
import pytest

from fetmosaic.errors import DimensionMismatch, EmptyInput, InvalidArgument
from fetmosaic.models import FrameCounts
from fetmosaic.seg_metrics import CLASS_NAMES, aggregate, class_occurrence, confusion, iou


def frame(video, pred, gt, fold=None):
    return FrameCounts(video_id=video, fold_id=fold, counts=confusion(pred, gt))


def brute_iou(pred, gt, c):
    inter = np.logical_and(pred == c, gt == c).sum()
    union = np.logical_or(pred == c, gt == c).sum()
    return None if union == 0 else inter / union


def test_class_names_order():
    assert CLASS_NAMES == ("BG", "Vessel", "Tool", "Fetus")


def test_confusion_matches_brute_force_randomized():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        pred = rng.integers(0, 4, (8, 8))
        gt = rng.integers(0, 4, (8, 8))
        counts = confusion(pred, gt)
        for c in range(4):
            assert counts.tp[c] == np.sum((pred == c) & (gt == c))
            assert counts.fp[c] == np.sum((pred == c) & (gt != c))
            assert counts.fn[c] == np.sum((pred != c) & (gt == c))
            assert iou(counts, c) == brute_iou(pred, gt, c)


def test_half_overlap_iou():
    gt = np.zeros((4, 4), dtype=np.uint8)
    pred = np.zeros((4, 4), dtype=np.uint8)
    gt[:, :2] = 1
    pred[:, 1:3] = 1
    # vessel: intersection 4, union 12
    counts = confusion(pred, gt)
    assert iou(counts, 1) == pytest.approx(1 / 3)
    assert iou(counts, 2) is None


def test_perfect_prediction():
    gt = np.array([[0, 1], [2, 3]])
    counts = confusion(gt, gt)
    assert [iou(counts, c) for c in range(4)] == [1.0, 1.0, 1.0, 1.0]


def test_valid_mask_restricts_counts():
    gt = np.array([[1, 1], [0, 0]])
    pred = np.array([[1, 0], [0, 0]])
    valid = np.array([[True, False], [True, True]])
    assert iou(confusion(pred, gt, valid), 1) == 1.0


def test_confusion_errors():
    with pytest.raises(DimensionMismatch):
        confusion(np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(InvalidArgument):
        confusion(np.full((2, 2), 4), np.zeros((2, 2)))


# --- aggregation ---

def test_per_video_means_and_class_row():
    gt = np.zeros((4, 4), dtype=np.uint8)
    gt[:, :2] = 1
    half = gt.copy()
    half[:, 1] = 0
    frames = [frame("A", gt, gt), frame("A", half, gt), frame("B", gt, gt)]
    rows = aggregate(frames)
    assert [(r.level, r.group, r.frames) for r in rows] == [("video", "A", 2), ("video", "B", 1), ("class", "mean", 3)]
    a = rows[0]
    assert a.class_iou[1] == pytest.approx((1.0 + 0.5) / 2)
    assert a.class_iou[2] is None and a.class_iou[3] is None
    bg_half = 8 / 12
    assert a.class_iou[0] == pytest.approx((1.0 + bg_half) / 2)
    assert a.overall == pytest.approx((a.class_iou[0] + a.class_iou[1]) / 2)
    mean_row = rows[-1]
    assert mean_row.class_iou[1] == pytest.approx((0.75 + 1.0) / 2)
    assert mean_row.class_iou[2] is None


def test_frame_order_does_not_matter():
    rng = np.random.default_rng(1)
    frames = [
        frame(f"V{i % 3}", rng.integers(0, 4, (8, 8)), rng.integers(0, 4, (8, 8)), fold=i % 2 + 1)
        for i in range(30)
    ]
    shuffled = list(frames)
    rng.shuffle(shuffled)
    for grouping in ("per_video", "per_fold", "overall"):
        assert aggregate(frames, grouping) == aggregate(shuffled, grouping)


def test_pixel_pooling_differs_from_frame_mean():
    gt_small = np.zeros((4, 4), dtype=np.uint8)
    gt_small[0, 0] = 1
    gt_big = np.ones((4, 4), dtype=np.uint8)
    frames = [frame("A", np.zeros((4, 4)), gt_small), frame("A", gt_big, gt_big)]
    mean_row = aggregate(frames, "overall", "frame_mean")[0]
    pooled_row = aggregate(frames, "overall", "pixel_pooled")[0]
    assert mean_row.class_iou[1] == pytest.approx(0.5)
    assert pooled_row.class_iou[1] == pytest.approx(16 / 17)


def test_fold_grouping():
    gt = np.ones((2, 2))
    frames = [frame("A", gt, gt, fold=2), frame("B", gt, gt, fold=1)]
    rows = aggregate(frames, "per_fold")
    assert [r.group for r in rows] == ["fold1", "fold2", "mean"]
    with pytest.raises(InvalidArgument):
        aggregate([frame("C", gt, gt)], "per_fold")


def test_overall_grouping():
    gt = np.ones((2, 2))
    rows = aggregate([frame("A", gt, gt), frame("B", gt, gt)], "overall")
    assert rows[0].group == "all" and rows[0].frames == 2


def test_aggregate_rejects_empty_and_unknown():
    with pytest.raises(EmptyInput):
        aggregate([])
    gt = np.ones((2, 2))
    with pytest.raises(InvalidArgument):
        aggregate([frame("A", gt, gt)], pooling="median")


# --- occurrence ---

def test_class_occurrence():
    a = np.array([[0, 1], [1, 1]])
    b = np.array([[0, 0], [3, 3]])
    occ = class_occurrence([a, b])
    assert occ.frames_with_class == (2, 1, 0, 1)
    assert occ.mean_pixels == (1.5, 1.5, 0.0, 1.0)
    assert occ.frame_count == 2


def test_class_occurrence_empty():
    with pytest.raises(EmptyInput):
        class_occurrence([])
