"""Command implementations; each computes everything before writing any file."""
import csv
import io
import logging
from pathlib import Path
from typing import Optional, Sequence

from .. import dataset_io
from ..consistency import score_chained, summarize
from ..errors import InvalidArgument, LengthMismatch, MissingDirectory
from ..homography import Homography
from ..mosaic import drift_report, layout_from_homographies, reanchor, render, to_anchor
from ..models import FrameCounts
from ..registration import register_sequence
from ..seg_metrics import CLASS_NAMES, aggregate, confusion
from ..synthetic import GT_FILE, generate_sequence, write_synthetic
from .models import ConsistencyRequest, MosaicRequest, RegisterRequest, SegRequest, SynthRequest
from .plots import ssim_plot_svg

logger = logging.getLogger(__name__)


def _fmt(value: Optional[float], digits: int = 6) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _load_pairwise(path: Path, frame_count: int) -> list[Homography]:
    envelope = dataset_io.read_homographies(path)
    hs = dataset_io.pairwise_from_file(envelope)
    if len(hs) != frame_count - 1:
        raise LengthMismatch(f"{path} holds {len(hs)} pairwise homographies for {frame_count} frames")
    return hs


# === synth ===

def cmd_synth(req: SynthRequest) -> int:
    seq = generate_sequence(req.trajectory)
    write_synthetic(seq, req.out, req.video_id)
    logger.info("wrote %d frames to %s", len(seq.frames), req.out)
    return 0


# === register ===

REGISTER_HEADER = (
    "pair_index", "source_index", "target_index", "converged",
    "final_residual", "iterations", "failure_reason",
)


def cmd_register(req: RegisterRequest) -> int:
    manifest = dataset_io.load_sequence(req.input, fov_margin_fraction=req.fov_margin)
    if req.substrate == "vessel_maps":
        frames = dataset_io.load_vessel_maps(req.input)
        if len(frames) != manifest.frame_count:
            raise LengthMismatch(f"{len(frames)} vessel maps for {manifest.frame_count} frames")
    else:
        frames = dataset_io.load_frames(manifest)
    fov = dataset_io.load_fov(manifest)

    results = register_sequence(frames, fov, req.registration)

    envelope = dataset_io.homography_envelope(
        manifest.video_id, [r.h for r in results], converged=[r.converged for r in results]
    )
    rows = [
        (
            i, i, i + 1, int(r.converged), repr(float(r.final_residual)),
            ";".join(str(n) for n in r.iterations_used), r.failure_reason or "",
        )
        for i, r in enumerate(results)
    ]
    dataset_io.write_homographies(req.out, envelope)
    _write_text(req.residuals, _csv_text(REGISTER_HEADER, rows))
    logger.info("wrote %s and %s", req.out, req.residuals)
    return 0


# === mosaic ===

def _ground_truth(path: Path, frame_count: int) -> list[Homography]:
    """Frame-to-frame-0 transforms from a ground-truth file."""
    envelope = dataset_io.read_homographies(path)
    if envelope.absolute is not None:
        absolute = [Homography.from_list(v) for v in envelope.absolute]
    else:
        pairwise = dataset_io.pairwise_from_file(envelope, use_converged=False)
        absolute = [to_anchor(pairwise, i, 0) for i in range(len(pairwise) + 1)]
    if len(absolute) != frame_count:
        raise LengthMismatch(f"{path} describes {len(absolute)} frames, the sequence has {frame_count}")
    return absolute


def cmd_mosaic(req: MosaicRequest) -> int:
    manifest = dataset_io.load_sequence(req.input, fov_margin_fraction=req.fov_margin)
    n = manifest.frame_count
    hs = _load_pairwise(req.homographies, n)
    stop = req.stop if req.stop is not None else n
    if stop > n:
        raise InvalidArgument(f"--stop {stop} exceeds the {n} frames of {manifest.video_id}")
    if req.anchor >= stop - req.start:
        raise InvalidArgument(f"--anchor {req.anchor} lies outside the {stop - req.start} selected frames")

    frames = dataset_io.load_frames(manifest)[req.start:stop]
    fov = dataset_io.load_fov(manifest)
    width, height = manifest.resolution
    lay = layout_from_homographies(hs[req.start:stop - 1], width, height, req.anchor)
    mosaic, _ = render(frames, [fov] * len(frames), lay, req.blend)

    gt_path = req.ground_truth or (req.input / GT_FILE)
    drift_rows = None
    if gt_path.is_file():
        absolute = _ground_truth(gt_path, n)
        truth = reanchor(absolute, req.start + req.anchor)[req.start:stop]
        drift_rows = drift_report(lay, truth)
    elif req.ground_truth is None and req.drift is not None:
        drift_rows = drift_report(lay)
    elif req.ground_truth is not None:
        raise MissingDirectory(f"{gt_path} does not exist")

    req.out.parent.mkdir(parents=True, exist_ok=True)
    dataset_io.write_image(req.out, mosaic)
    if drift_rows is not None:
        drift_path = req.drift or req.out.with_name(req.out.stem + "_drift.csv")
        rows = [(req.start + r.frame_index, _fmt(r.corner_error_px)) for r in drift_rows]
        _write_text(drift_path, _csv_text(("frame_index", "corner_error_px"), rows))
        final = drift_rows[-1].corner_error_px
        logger.info("drift at frame %d: %s px", req.start + len(drift_rows) - 1, _fmt(final, 3) or "n/a")
    logger.info(
        "mosaic %dx%d from %d frames (%d excluded) written to %s",
        lay.canvas_width, lay.canvas_height, lay.frame_count, len(lay.excluded), req.out,
    )
    return 0


# === eval-consistency ===

CONSISTENCY_HEADER = ("source_index", "target_index", "status", "overlap_fraction", "ssim")


def cmd_eval_consistency(req: ConsistencyRequest) -> int:
    manifest = dataset_io.load_sequence(req.input, fov_margin_fraction=req.fov_margin)
    frames = dataset_io.load_frames(manifest)
    hs = _load_pairwise(req.homographies, manifest.frame_count)
    fov = dataset_io.load_fov(manifest)

    results = score_chained(frames, hs, req.gap, fov, req.consistency)

    rows = [
        (p.source_index, p.target_index, o.status, _fmt(o.overlap_fraction), _fmt(o.ssim))
        for p, o in results
    ]
    svg = ssim_plot_svg(
        [o.ssim for _, o in results],
        title=f"{manifest.video_id}: SSIM of pairs {req.gap} frames apart",
        highlight=req.highlight,
    )
    _write_text(req.csv, _csv_text(CONSISTENCY_HEADER, rows))
    _write_text(req.svg or req.csv.with_suffix(".svg"), svg)
    summary = summarize([o for _, o in results])
    logger.info("%d pairs scored, %d failed", summary.scored, summary.failed)
    return 0


# === eval-seg ===

SEG_HEADER = ("level", "group", "frames") + CLASS_NAMES + ("overall",)


def _video_pairs(pred_root: Path, gt_root: Path) -> list[tuple[Path, Path]]:
    if (gt_root / dataset_io.IMAGES_DIR).is_dir():
        return [(pred_root, gt_root)]
    return [(pred_root / d.name, d) for d in dataset_io.discover_videos(gt_root)]


def _prediction_files(pred_dir: Path) -> list[Path]:
    labels = pred_dir / dataset_io.LABELS_DIR
    if not labels.is_dir():
        raise MissingDirectory(f"{labels} does not exist")
    return sorted(p for p in labels.iterdir() if p.suffix.lower() == ".png")


def cmd_eval_seg(req: SegRequest) -> int:
    folds = dataset_io.load_fold_config(req.folds)
    frames: list[FrameCounts] = []
    for pred_dir, gt_dir in _video_pairs(req.pred, req.gt):
        manifest = dataset_io.load_sequence(gt_dir, expect_labels=True)
        preds = _prediction_files(pred_dir)
        if len(preds) != manifest.frame_count:
            raise LengthMismatch(
                f"{manifest.video_id}: {len(preds)} predictions for {manifest.frame_count} labelled frames"
            )
        fold = folds.fold_of(manifest.video_id)
        for pred_path, gt_label in zip(preds, dataset_io.load_labels(manifest)):
            counts = confusion(dataset_io.read_label(pred_path), gt_label)
            frames.append(FrameCounts(video_id=manifest.video_id, fold_id=fold, counts=counts))

    per_video = aggregate(frames, "per_video", req.pooling)
    table = per_video[:-1]
    if all(f.fold_id is not None for f in frames):
        table += aggregate(frames, "per_fold", req.pooling)[:-1]
    table += aggregate(frames, "overall", req.pooling)[:-1]
    table.append(per_video[-1])

    rows = [(r.level, r.group, r.frames, *(_fmt(v) for v in r.class_iou), _fmt(r.overall)) for r in table]
    _write_text(req.out, _csv_text(SEG_HEADER, rows))
    logger.info("scored %d frames of %d videos; class means %s", len(frames), len(per_video) - 1,
                ", ".join(f"{name}={_fmt(v, 3) or 'n/a'}" for name, v in zip(CLASS_NAMES, per_video[-1].class_iou)))
    return 0
