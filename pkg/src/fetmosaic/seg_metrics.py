"""Per-class IoU of label masks and its aggregation over videos and folds."""
from __future__ import annotations

import math
from typing import Literal, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DimensionMismatch, EmptyInput, InvalidArgument
from .models import ClassOccurrence, ConfusionCounts, FrameCounts, IoURow

CLASS_NAMES = ("BG", "Vessel", "Tool", "Fetus")
N_CLASSES = len(CLASS_NAMES)

LabelMask = npt.NDArray[np.integer]
Grouping = Literal["per_video", "per_fold", "overall"]
Pooling = Literal["frame_mean", "pixel_pooled"]


def confusion_matrix(pred: npt.ArrayLike, gt: npt.ArrayLike, valid: Optional[npt.ArrayLike] = None) -> npt.NDArray[np.int64]:
    """4x4 matrix; rows are ground-truth classes, columns predicted classes."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != gt.shape:
            raise DimensionMismatch(f"valid mask {valid.shape} and labels {gt.shape} differ in size")
        pred, gt = pred[valid], gt[valid]
    pred = pred.astype(np.int64).ravel()
    gt = gt.astype(np.int64).ravel()
    if pred.size and (min(pred.min(), gt.min()) < 0 or max(pred.max(), gt.max()) >= N_CLASSES):
        raise InvalidArgument(f"label values must lie in 0..{N_CLASSES - 1}")
    return np.bincount(N_CLASSES * gt + pred, minlength=N_CLASSES ** 2).reshape(N_CLASSES, N_CLASSES)


def confusion(pred: npt.ArrayLike, gt: npt.ArrayLike, valid: Optional[npt.ArrayLike] = None) -> ConfusionCounts:
    """Per-class tp, fp and fn of ``pred`` against ``gt``, inside ``valid`` when given.

    Raises:
        DimensionMismatch: if the masks differ in size
    """
    m = confusion_matrix(pred, gt, valid)
    tp = np.diag(m)
    return ConfusionCounts(
        tp=tuple(int(v) for v in tp),
        fp=tuple(int(v) for v in m.sum(axis=0) - tp),
        fn=tuple(int(v) for v in m.sum(axis=1) - tp),
    )


def iou(counts: ConfusionCounts, class_id: int) -> Optional[float]:
    """tp / (tp + fp + fn); None when the class is absent from both masks."""
    denom = counts.tp[class_id] + counts.fp[class_id] + counts.fn[class_id]
    if denom == 0:
        return None
    return counts.tp[class_id] / denom


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    # fsum keeps the result independent of frame order
    defined = [v for v in values if v is not None]
    return math.fsum(defined) / len(defined) if defined else None


def _group_key(frame: FrameCounts, grouping: Grouping) -> str:
    if grouping == "per_video":
        return frame.video_id
    if grouping == "per_fold":
        if frame.fold_id is None:
            raise InvalidArgument(f"{frame.video_id} has no fold assignment")
        return f"fold{frame.fold_id}"
    return "all"


def _group_ious(frames: Sequence[FrameCounts], pooling: Pooling) -> tuple[Optional[float], ...]:
    if pooling == "pixel_pooled":
        total = frames[0].counts
        for f in frames[1:]:
            total = total + f.counts
        return tuple(iou(total, c) for c in range(N_CLASSES))
    return tuple(_mean([iou(f.counts, c) for f in frames]) for c in range(N_CLASSES))


def aggregate(
    frames: Sequence[FrameCounts],
    grouping: Grouping = "per_video",
    pooling: Pooling = "frame_mean",
) -> list[IoURow]:
    """Mean per-class IoU per group, followed by a row averaging the groups.

    With ``frame_mean`` pooling a group's class IoU is the mean of the per-frame
    IoUs, skipping frames where that class is undefined; ``pixel_pooled`` sums
    the group's counts first. A row's ``overall`` is the mean of its defined
    class values.

    Raises:
        EmptyInput: if there are no frames
        InvalidArgument: if fold grouping meets a frame without a fold
    """
    if not frames:
        raise EmptyInput("no frames to aggregate")
    if grouping not in ("per_video", "per_fold", "overall"):
        raise InvalidArgument(f"unknown grouping {grouping!r}")
    if pooling not in ("frame_mean", "pixel_pooled"):
        raise InvalidArgument(f"unknown pooling {pooling!r}")

    groups: dict[str, list[FrameCounts]] = {}
    for f in frames:
        groups.setdefault(_group_key(f, grouping), []).append(f)

    level = {"per_video": "video", "per_fold": "fold", "overall": "overall"}[grouping]
    rows = []
    for key in sorted(groups):
        class_iou = _group_ious(groups[key], pooling)
        rows.append(IoURow(level=level, group=key, frames=len(groups[key]), class_iou=class_iou, overall=_mean(class_iou)))

    class_means = tuple(_mean([r.class_iou[c] for r in rows]) for c in range(N_CLASSES))
    rows.append(IoURow(level="class", group="mean", frames=len(frames), class_iou=class_means, overall=_mean(class_means)))
    return rows


def class_occurrence(labels: Sequence[npt.ArrayLike]) -> ClassOccurrence:
    """Frames containing each class, and average pixels of each class per frame."""
    if not labels:
        raise EmptyInput("no label masks given")
    present = np.zeros(N_CLASSES, dtype=np.int64)
    pixels = np.zeros(N_CLASSES, dtype=np.int64)
    for lab in labels:
        hist = np.bincount(np.asarray(lab, dtype=np.int64).ravel(), minlength=N_CLASSES)[:N_CLASSES]
        present += hist > 0
        pixels += hist
    return ClassOccurrence(
        frames_with_class=tuple(int(v) for v in present),
        mean_pixels=tuple(float(v) / len(labels) for v in pixels),
        frame_count=len(labels),
    )
