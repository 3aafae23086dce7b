#!/usr/bin/env python3
"""
Smoke test for the fetmosaic command line.

Synthesizes a sequence, registers it, builds a mosaic and runs both
evaluations, checking that every stage exits cleanly and writes its files.
The pipeline then runs again in a second directory and the outputs must
match byte for byte.

Usage:
    uv run scripts/smoke_pipeline.py --help
    uv run scripts/smoke_pipeline.py --workdir /tmp/fetmosaic-smoke
    uv run scripts/smoke_pipeline.py --frames 30 --size 256 --seed 4
"""
import argparse
import csv
import hashlib
import sys
import tempfile
from pathlib import Path
from typing import Optional

from fetmosaic.cli.main import main as fetmosaic


class PipelineTester:
    """Runs every fetmosaic command against one synthetic sequence."""

    def __init__(self, workdir: Path, frames: int, size: int, seed: int, name: str = "SmokeVideo"):
        self.workdir = workdir
        self.sequence = workdir / name
        self.frames = frames
        self.size = size
        self.seed = seed

    def run(self, title: str, argv: list[str], expected: list[Path]) -> bool:
        """Run one command and check its exit status and outputs."""
        print(f"\n{'='*60}")
        print(title)
        print(f"{'='*60}")
        print("fetmosaic " + " ".join(argv))
        status = fetmosaic(argv)
        missing = [p for p in expected if not p.is_file()]
        print(f"Exit status: {status}")
        for p in missing:
            print(f"Missing output: {p}")
        return status == 0 and not missing

    def print_csv(self, path: Path, limit: int = 8):
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if i > limit:
                    print("  ...")
                    break
                print("  " + ", ".join(row))

    # === Stages ===

    def test_synth(self):
        return self.run(
            "Synthesize sequence",
            ["synth", "--out", str(self.sequence), "--frames", str(self.frames),
             "--size", str(self.size), "--seed", str(self.seed), "--video-id", "SmokeVideo"],
            [self.sequence / "gt_homographies.json", self.sequence / "manifest.json"],
        )

    def test_register(self):
        ok = self.run(
            "Register consecutive frames",
            ["register", str(self.sequence)],
            [self.sequence / "homographies.json", self.sequence / "registration.csv"],
        )
        if ok:
            self.print_csv(self.sequence / "registration.csv")
        return ok

    def test_mosaic(self):
        ok = self.run(
            "Build mosaic with drift against ground truth",
            ["mosaic", str(self.sequence)],
            [self.sequence / "mosaic.png", self.sequence / "mosaic_drift.csv"],
        )
        if ok:
            self.print_csv(self.sequence / "mosaic_drift.csv", limit=self.frames)
        return ok

    def test_consistency(self, gap: int):
        ok = self.run(
            f"Consistency of pairs {gap} frames apart",
            ["eval-consistency", str(self.sequence), "--gap", str(gap)],
            [self.sequence / "consistency.csv", self.sequence / "consistency.svg"],
        )
        if ok:
            self.print_csv(self.sequence / "consistency.csv")
        return ok

    def test_segmentation(self):
        out = self.workdir / "iou.csv"
        ok = self.run(
            "Segmentation IoU of the labels against themselves",
            ["eval-seg", str(self.sequence), str(self.sequence), "--out", str(out)],
            [out],
        )
        if ok:
            self.print_csv(out)
        return ok


DETERMINISTIC_OUTPUTS = ("homographies.json", "registration.csv", "mosaic.png", "consistency.csv", "consistency.svg")


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def check_determinism(first: PipelineTester, second: PipelineTester, gap: int) -> bool:
    """Repeat the pipeline in a second directory and compare output bytes."""
    ok = second.test_synth() and second.test_register() and second.test_mosaic() and second.test_consistency(gap)
    if not ok:
        return False
    same = True
    for name in DETERMINISTIC_OUTPUTS:
        a, b = first.sequence / name, second.sequence / name
        match = a.is_file() and b.is_file() and file_digest(a) == file_digest(b)
        print(f"{'same' if match else 'DIFFERENT'}  {name}")
        same &= match
    return same


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the whole fetmosaic pipeline on synthetic data")
    parser.add_argument("--workdir", type=Path, help="Directory for outputs (default: a temporary directory)")
    parser.add_argument("--frames", type=int, default=20, help="Number of frames (default: 20)")
    parser.add_argument("--size", type=int, default=192, help="Frame side in px (default: 192)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gap", type=int, default=5, help="Consistency gap (default: 5)")
    args = parser.parse_args(argv)

    with tempfile.TemporaryDirectory(prefix="fetmosaic-smoke-") as tmp:
        workdir = args.workdir or Path(tmp)
        workdir.mkdir(parents=True, exist_ok=True)
        tester = PipelineTester(workdir, args.frames, args.size, args.seed)

        results = {
            "synth": tester.test_synth(),
            "register": tester.test_register(),
            "mosaic": tester.test_mosaic(),
            "eval-consistency": tester.test_consistency(args.gap),
            "eval-seg": tester.test_segmentation(),
        }
        repeat = PipelineTester(workdir, args.frames, args.size, args.seed, name="SmokeVideoRepeat")
        results["determinism"] = check_determinism(tester, repeat, args.gap)

        print(f"\n{'='*60}")
        print("Summary")
        print(f"{'='*60}")
        for name, ok in results.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if args.workdir:
            print(f"\nOutputs kept in {workdir}")

    return 0 if all(results.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
