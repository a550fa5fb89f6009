#!/usr/bin/env python3
"""Train two touch models (zigzag and straight), one point model per letter,
then render the full letters x touches grid of composed SVGs, showing how
swapping the lower decoder changes the line texture but not the stroke order.

    python3 scripts/touch_swap_grid.py --letters AWN --out out/grid
"""

import argparse
from pathlib import Path

import numpy as np

from strokegen import nn
from strokegen.composer import ComposedPlan, compose, write_svg
from strokegen.core import default_schema
from strokegen.cvae_traj import TrajConfig, fit_traj_model
from strokegen.fixtures import LETTER_STROKES, SyntheticStrokeSpec, make_character
from strokegen.ingestion import SegmentationConfig, augment, downsample, extract_endpoints, rotation_angles, segment_strokes
from strokegen.fixtures import touch_strokes
from strokegen.vae_point import PointConfig, encode_points, fit_point_model, normalize_endpoint_seq

N = 32
LENGTHS = [0.06, 0.14]
ANGLES = [0.0, 30.0, 60.0]


def train_touch(kind: str, amplitude: float, epochs: int, seed: int):
    spec = SyntheticStrokeSpec(kind=kind, amplitude=amplitude, periods=4, force_peak=1.0)
    data = augment(touch_strokes(LENGTHS, ANGLES, spec, N, sample_period=0.02), rotation_angles(20.0))
    model, history = fit_traj_model(data, TrajConfig(hidden=24, n_samples=N), nn.make_rng(seed), epochs=epochs)
    print(f"{kind}: final loss {history[-1]:.4f}")
    return model


def train_letter(letter: str, epochs: int, seed: int):
    rng = nn.make_rng(seed)
    sequences = []
    for _ in range(12):
        shift = rng.normal(scale=0.002, size=2)
        _, rec = make_character(letter, 0.1, rng, SyntheticStrokeSpec(noise_sigma=0.0002),
                                origin=(float(shift[0]), float(shift[1])), sample_period=0.02)
        strokes = [downsample(s, N) for s in segment_strokes(rec, SegmentationConfig())]
        sequences.append(extract_endpoints(strokes))
    model, history = fit_point_model(sequences, default_schema(0.02), PointConfig(hidden=64), nn.make_rng(seed + 1), epochs=epochs)
    print(f"{letter}: final loss {history[-1]:.5f}")
    mu, _ = encode_points(model, normalize_endpoint_seq(model, sequences[0]))
    return model, mu


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--letters", default="AWN", help=f"subset of {''.join(sorted(LETTER_STROKES))}")
    ap.add_argument("--out", type=Path, default=Path("out/grid"))
    ap.add_argument("--touch-epochs", type=int, default=2000)
    ap.add_argument("--point-epochs", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    touches = {
        "zigzag": train_touch("zigzag", 0.006, args.touch_epochs, args.seed + 10),
        "straight": train_touch("straight", 0.0, args.touch_epochs, args.seed + 20),
    }
    for letter in args.letters.upper():
        point_model, z = train_letter(letter, args.point_epochs, args.seed + ord(letter))
        for touch_name, traj_model in touches.items():
            plan = ComposedPlan(point_model, traj_model, z, len(LETTER_STROKES[letter]))
            target = args.out / f"{letter}-{touch_name}.svg"
            write_svg(target, compose(plan))
            print(f"  wrote {target}")
