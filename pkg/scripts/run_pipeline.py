#!/usr/bin/env python3
"""End-to-end demo: synthesize data, train both models, compose a character,
resample to the 1 ms grid, and replay it through the simulated plant.

Desk-scale sizes (a few minutes on one core). Artifacts land in --out.

    python3 scripts/run_pipeline.py --out out/demo --letter A
"""

import argparse
import sys
from pathlib import Path

from strokegen.cli import main as cli


def sh(*argv) -> None:
    argv = [str(a) for a in argv]
    print("+ strokegen " + " ".join(argv))
    code = cli(argv)
    if code != 0:
        sys.exit(code)


def run(out: Path, letter: str, seed: int, traj_epochs: int, point_epochs: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    sh("fixtures", "--kind", "character", "--letter", letter, "--copies", 12, "--scale", 0.1,
       "--jitter", 0.02, "--noise", 0.0002, "--samples", 64, "--seed", seed, "--out", out / "recordings")
    sh("fixtures", "--kind", "touch", "--touch", "zigzag", "--amplitude", 0.006, "--periods", 4,
       "--lengths", "0.06,0.14", "--angles", "0,30,60", "--copies", 1, "--samples", 64,
       "--seed", seed + 1, "--out", out / "touch_recordings")
    sh("ingest", "--input", out / "recordings", "--target-samples", 32, "--rotate-step", 0,
       "--out", out / "char-strokes.tsv", "--points-out", out / "char-points.tsv")
    sh("ingest", "--input", out / "touch_recordings", "--target-samples", 32, "--rotate-step", 20,
       "--out", out / "touch-strokes.tsv")
    sh("train-point", "--data", out / "char-points.tsv", "--epochs", point_epochs, "--seed", seed + 2,
       "--out", out / "point.json")
    sh("train-traj", "--data", out / "touch-strokes.tsv", "--epochs", traj_epochs, "--hidden", 24,
       "--seed", seed + 3, "--out", out / "traj.json")
    strokes = {"A": 3, "E": 4, "F": 3, "H": 3, "I": 1, "K": 3, "L": 2, "M": 4, "N": 3,
               "T": 2, "V": 2, "W": 4, "X": 2, "Y": 3, "Z": 3}[letter.upper()]
    sh("compose", "--point-model", out / "point.json", "--traj-model", out / "traj.json",
       "--strokes", strokes, "--out", out / "composed.csv")
    sh("export", "--in", out / "composed.csv", "--format", "svg", "--out", out / "composed.svg")
    sh("resample", "--in", out / "composed.csv", "--period-ms", 1, "--out", out / "composed-1ms.csv")
    sh("replay", "--traj", out / "composed-1ms.csv", "--force-control", "on", "--out", out / "replay-log.csv")
    sh("replay", "--traj", out / "composed-1ms.csv", "--force-control", "off", "--height-offset-mm", -1,
       "--k-env", 2000, "--out", out / "replay-log-no-force.csv")
    print(f"\ndone; see {out}/composed.svg and {out}/replay-log.csv")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("out/demo"))
    ap.add_argument("--letter", default="A")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--traj-epochs", type=int, default=2000)
    ap.add_argument("--point-epochs", type=int, default=1500)
    args = ap.parse_args()
    run(args.out, args.letter, args.seed, args.traj_epochs, args.point_epochs)
