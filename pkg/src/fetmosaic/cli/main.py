"""Command-line entry point for the fetmosaic tools."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

# Load .env from the project root (walk up from src/fetmosaic/cli/main.py),
# falling back to the current working directory
env_path = Path(__file__).parent.parent.parent.parent / ".env"
if env_path.exists():
    load_dotenv(env_path)
else:
    load_dotenv()

from .. import __version__
from ..config import get_settings
from ..errors import FetMosaicError, UsageError
from ..models import ConsistencyConfig, RegistrationConfig, TrajectorySpec
from .commands import cmd_eval_consistency, cmd_eval_seg, cmd_mosaic, cmd_register, cmd_synth
from .models import ConsistencyRequest, MosaicRequest, RegisterRequest, SegRequest, SynthRequest

logger = logging.getLogger("fetmosaic")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _span(text: str) -> tuple[int, int]:
    try:
        start, stop = text.split(":")
        return int(start), int(stop)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected START:STOP, got {text!r}")


# === request builders ===

def _synth_request(a: argparse.Namespace) -> SynthRequest:
    return SynthRequest(
        out=a.out,
        video_id=a.video_id,
        trajectory=TrajectorySpec(
            n_frames=a.frames,
            frame_size=a.size,
            max_step_translation=a.step_translation,
            max_step_rotation=a.step_rotation,
            max_step_scale=a.step_scale,
            perspective_jitter=a.perspective_jitter,
            noise_sigma=a.noise,
            fov_margin_fraction=a.fov_margin,
            seed=a.seed,
        ),
    )


def _register_request(a: argparse.Namespace) -> RegisterRequest:
    return RegisterRequest(
        input=a.input,
        out=a.out or a.input / "homographies.json",
        residuals=a.residuals or a.input / "registration.csv",
        substrate=a.substrate,
        fov_margin=a.fov_margin,
        registration=RegistrationConfig(
            pyramid_levels=a.levels,
            max_iterations_per_level=a.max_iterations,
            convergence_epsilon=a.epsilon,
            parameterization=a.model,
            min_valid_overlap_fraction=a.min_overlap,
        ),
    )


def _mosaic_request(a: argparse.Namespace) -> MosaicRequest:
    return MosaicRequest(
        input=a.input,
        homographies=a.homographies or a.input / "homographies.json",
        out=a.out or a.input / "mosaic.png",
        drift=a.drift,
        ground_truth=a.ground_truth,
        anchor=a.anchor,
        blend=a.blend,
        start=a.start,
        stop=a.stop,
        fov_margin=a.fov_margin,
    )


def _consistency_request(a: argparse.Namespace) -> ConsistencyRequest:
    return ConsistencyRequest(
        input=a.input,
        homographies=a.homographies or a.input / "homographies.json",
        csv=a.csv or a.input / "consistency.csv",
        svg=a.svg,
        gap=a.gap,
        highlight=a.highlight,
        fov_margin=a.fov_margin,
        consistency=ConsistencyConfig(),
    )


def _seg_request(a: argparse.Namespace) -> SegRequest:
    return SegRequest(pred=a.pred, gt=a.gt, out=a.out, folds=a.folds, pooling=a.pooling)


COMMANDS: dict[str, tuple[Callable[[argparse.Namespace], BaseModel], Callable]] = {
    "synth": (_synth_request, cmd_synth),
    "register": (_register_request, cmd_register),
    "mosaic": (_mosaic_request, cmd_mosaic),
    "eval-consistency": (_consistency_request, cmd_eval_consistency),
    "eval-seg": (_seg_request, cmd_eval_seg),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fetmosaic",
        description="Register, mosaic and evaluate circular field-of-view video sequences",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate a synthetic sequence with ground truth")
    p.add_argument("--out", type=Path, required=True, help="Output sequence directory")
    p.add_argument("--video-id", help="Video id (default: directory name)")
    p.add_argument("--frames", type=int, default=50, help="Number of frames (default: 50)")
    p.add_argument("--size", type=int, default=448, help="Square frame side in px (default: 448)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step-translation", type=float, default=4.0, help="px per frame (default: 4)")
    p.add_argument("--step-rotation", type=float, default=1.0, help="degrees per frame (default: 1)")
    p.add_argument("--step-scale", type=float, default=0.01, help="relative scale per frame (default: 0.01)")
    p.add_argument("--perspective-jitter", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma")
    p.add_argument("--fov-margin", type=float, default=0.0)

    p = sub.add_parser("register", help="Register every frame onto its successor")
    p.add_argument("input", type=Path, help="Sequence directory")
    p.add_argument("--out", type=Path, help="Homography JSON (default: INPUT/homographies.json)")
    p.add_argument("--residuals", type=Path, help="Per-pair CSV (default: INPUT/registration.csv)")
    p.add_argument("--substrate", choices=["frames", "vessel_maps"], default="frames")
    p.add_argument("--levels", type=int, default=4, help="Pyramid levels (default: 4)")
    p.add_argument("--max-iterations", type=int, default=50, help="Iterations per level (default: 50)")
    p.add_argument("--epsilon", type=float, default=1e-3, help="Convergence threshold in px (default: 1e-3)")
    p.add_argument("--model", choices=["affine6", "projective8"], default="affine6")
    p.add_argument("--min-overlap", type=float, default=0.25)
    p.add_argument("--fov-margin", type=float, default=0.0)

    p = sub.add_parser("mosaic", help="Blend a sequence into a mosaic")
    p.add_argument("input", type=Path, help="Sequence directory")
    p.add_argument("--homographies", type=Path, help="Pairwise homography JSON (default: INPUT/homographies.json)")
    p.add_argument("--out", type=Path, help="Mosaic PNG (default: INPUT/mosaic.png)")
    p.add_argument("--drift", type=Path, help="Drift CSV (default: next to the mosaic)")
    p.add_argument("--ground-truth", type=Path, help="Ground truth JSON (default: INPUT/gt_homographies.json if present)")
    p.add_argument("--anchor", type=int, default=0, help="Anchor frame relative to --start")
    p.add_argument("--blend", choices=["overwrite_latest", "running_mean"], default="running_mean")
    p.add_argument("--start", type=int, default=0, help="First frame used")
    p.add_argument("--stop", type=int, help="One past the last frame used")
    p.add_argument("--fov-margin", type=float, default=0.0)

    p = sub.add_parser("eval-consistency", help="Score registration consistency of frame pairs")
    p.add_argument("input", type=Path, help="Sequence directory")
    p.add_argument("--homographies", type=Path, help="Pairwise homography JSON (default: INPUT/homographies.json)")
    p.add_argument("--csv", type=Path, help="Per-pair CSV (default: INPUT/consistency.csv)")
    p.add_argument("--svg", type=Path, help="SSIM plot (default: the CSV path with .svg)")
    p.add_argument("--gap", type=int, default=5, help="Frames between source and target (default: 5)")
    p.add_argument("--highlight", type=_span, metavar="START:STOP", help="Pair range drawn in red")
    p.add_argument("--fov-margin", type=float, default=0.0)

    p = sub.add_parser("eval-seg", help="Per-class IoU of predicted label masks")
    p.add_argument("pred", type=Path, help="Prediction directory")
    p.add_argument("gt", type=Path, help="Ground-truth sequence or multi-video directory")
    p.add_argument("--out", type=Path, required=True, help="IoU table CSV")
    p.add_argument("--folds", type=Path, help="Fold file of 'video_id fold_id' lines")
    p.add_argument("--pooling", choices=["frame_mean", "pixel_pooled"], default="frame_mean")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the fetmosaic command."""
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ValueError as e:
        logging.basicConfig(format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    build, run = COMMANDS[args.command]
    try:
        return run(build(args))
    except (UsageError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except (FetMosaicError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
