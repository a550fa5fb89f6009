"""Synthetic stroke and character generators standing in for human recordings.

Strokes live in the x/y plane with a contact-force channel. The zigzag kind
produces the reciprocating within-stroke motion ("touch") with an integer
number of periods so both endpoints stay exactly on the chord.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChannelSchema, StrokeEndpoints, Trajectory, default_schema

# stroke-boundary force floor sits above the 0.25 N segmentation threshold so
# a segmented stroke spans every generated sample
FORCE_FLOOR = 0.3

LETTER_STROKES: dict[str, list[tuple[tuple[float, float], tuple[float, float]]]] = {
    "A": [((0.0, 0.0), (0.5, 1.0)), ((0.5, 1.0), (1.0, 0.0)), ((0.2, 0.4), (0.8, 0.4))],
    "E": [((0.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (0.8, 1.0)), ((0.0, 0.5), (0.6, 0.5)), ((0.0, 0.0), (0.8, 0.0))],
    "F": [((0.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (0.8, 1.0)), ((0.0, 0.5), (0.6, 0.5))],
    "H": [((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (1.0, 1.0)), ((0.0, 0.5), (1.0, 0.5))],
    "I": [((0.5, 0.0), (0.5, 1.0))],
    "K": [((0.0, 0.0), (0.0, 1.0)), ((0.8, 1.0), (0.0, 0.45)), ((0.25, 0.62), (0.9, 0.0))],
    "L": [((0.0, 1.0), (0.0, 0.0)), ((0.0, 0.0), (0.7, 0.0))],
    "M": [((0.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (0.5, 0.4)), ((0.5, 0.4), (1.0, 1.0)), ((1.0, 1.0), (1.0, 0.0))],
    "N": [((0.0, 0.0), (0.0, 1.0)), ((0.0, 1.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 1.0))],
    "T": [((0.0, 1.0), (1.0, 1.0)), ((0.5, 1.0), (0.5, 0.0))],
    "V": [((0.0, 1.0), (0.5, 0.0)), ((0.5, 0.0), (1.0, 1.0))],
    "W": [((0.0, 1.0), (0.25, 0.0)), ((0.25, 0.0), (0.5, 0.7)), ((0.5, 0.7), (0.75, 0.0)), ((0.75, 0.0), (1.0, 1.0))],
    "X": [((0.0, 1.0), (1.0, 0.0)), ((0.0, 0.0), (1.0, 1.0))],
    "Y": [((0.0, 1.0), (0.5, 0.5)), ((1.0, 1.0), (0.5, 0.5)), ((0.5, 0.5), (0.5, 0.0))],
    "Z": [((0.0, 1.0), (1.0, 1.0)), ((1.0, 1.0), (0.0, 0.0)), ((0.0, 0.0), (1.0, 0.0))],
}


@dataclass
class SyntheticStrokeSpec:
    kind: str = "straight"  # straight | zigzag | arc
    length: float = 0.1  # m
    angle_deg: float = 0.0
    amplitude: float = 0.0  # perpendicular displacement [m] (zigzag, arc)
    periods: int = 3  # zigzag periods along the stroke
    force_peak: float = 1.0  # N
    force_profile: str = "trapezoid"  # trapezoid | constant
    noise_sigma: float = 0.0  # position noise [m]

    def __post_init__(self):
        if self.kind not in ("straight", "zigzag", "arc"):
            raise ValueError(f"unknown stroke kind {self.kind!r}")
        if self.length <= 0:
            raise ValueError("stroke length must be positive")
        if self.force_peak < FORCE_FLOOR:
            raise ValueError(f"force peak must stay above the {FORCE_FLOOR} N contact floor")
        if self.periods < 1:
            raise ValueError("zigzag needs at least one period")


def _force_profile(spec: SyntheticStrokeSpec, n: int) -> np.ndarray:
    if spec.force_profile == "constant":
        return np.full(n, spec.force_peak)
    if spec.force_profile != "trapezoid":
        raise ValueError(f"unknown force profile {spec.force_profile!r}")
    s = np.linspace(0.0, 1.0, n)
    ramp = np.minimum(1.0, np.minimum(s, 1.0 - s) / 0.15)
    return FORCE_FLOOR + (spec.force_peak - FORCE_FLOOR) * ramp


def make_stroke(
    spec: SyntheticStrokeSpec,
    n_samples: int,
    rng: np.random.Generator | None = None,
    start: tuple[float, float] = (0.0, 0.0),
    end: tuple[float, float] | None = None,
    sample_period: float = 0.01,
) -> Trajectory:
    """One synthetic stroke; deterministic given the rng seed.

    ``end`` overrides the length/angle fields when both endpoints are known
    (used when tracing letter segments).
    """
    if n_samples < 2:
        raise ValueError("a stroke needs at least 2 samples")
    start_v = np.asarray(start, dtype=np.float64)
    if end is None:
        direction = np.deg2rad(spec.angle_deg)
        end_v = start_v + spec.length * np.array([np.cos(direction), np.sin(direction)])
    else:
        end_v = np.asarray(end, dtype=np.float64)
    chord = end_v - start_v
    chord_len = float(np.linalg.norm(chord))
    if chord_len <= 0:
        raise ValueError("degenerate stroke: start equals end")
    t = np.linspace(0.0, 1.0, n_samples)
    xy = start_v[None, :] + t[:, None] * chord[None, :]
    if spec.kind == "zigzag" and spec.amplitude != 0.0:
        perp = np.array([-chord[1], chord[0]]) / chord_len
        xy += (spec.amplitude * np.sin(2.0 * np.pi * spec.periods * t))[:, None] * perp[None, :]
    elif spec.kind == "arc" and spec.amplitude != 0.0:
        perp = np.array([-chord[1], chord[0]]) / chord_len
        xy += (spec.amplitude * np.sin(np.pi * t))[:, None] * perp[None, :]
    if spec.noise_sigma > 0.0:
        if rng is None:
            raise ValueError("noise requested but no rng supplied")
        noise = rng.normal(scale=spec.noise_sigma, size=(n_samples, 2))
        noise[0] = 0.0
        noise[-1] = 0.0  # keep endpoints exact for endpoint extraction
        xy += noise
    force = _force_profile(spec, n_samples)
    values = np.column_stack([xy, force])
    return Trajectory(default_schema(sample_period), values)


def make_character(
    letter: str,
    scale: float,
    rng: np.random.Generator | None = None,
    touch: SyntheticStrokeSpec | None = None,
    samples_per_stroke: int = 80,
    gap_samples: int = 20,
    sample_period: float = 0.008,
    origin: tuple[float, float] = (0.0, 0.0),
) -> tuple[list[StrokeEndpoints], Trajectory]:
    """Canonical stroke decomposition of a letter plus a full pen recording.

    The recording includes zero-force pen-up travel between strokes, so
    force-threshold segmentation recovers exactly the canonical strokes.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    key = letter.upper()
    if key not in LETTER_STROKES:
        raise ValueError(f"unsupported letter {letter!r} (have {sorted(LETTER_STROKES)})")
    touch = touch or SyntheticStrokeSpec()
    origin_v = np.asarray(origin, dtype=np.float64)

    strokes: list[Trajectory] = []
    endpoints: list[StrokeEndpoints] = []
    rows: list[np.ndarray] = []
    schema = default_schema(sample_period)
    prev_xy = None
    for m, (a, b) in enumerate(LETTER_STROKES[key], start=1):
        start = origin_v + scale * np.asarray(a)
        end = origin_v + scale * np.asarray(b)
        stroke = make_stroke(touch, samples_per_stroke, rng, tuple(start), tuple(end), sample_period)
        if prev_xy is None:
            lead = np.zeros((gap_samples, 3))
            lead[:, :2] = stroke.values[0, :2]
            rows.append(lead)
        else:
            travel = np.linspace(prev_xy, stroke.values[0, :2], gap_samples)
            rows.append(np.column_stack([travel, np.zeros(gap_samples)]))
        rows.append(stroke.values)
        prev_xy = stroke.values[-1, :2]
        strokes.append(stroke)
        endpoints.append(StrokeEndpoints(stroke.values[0], stroke.values[-1], m))
    tail = np.zeros((gap_samples, 3))
    tail[:, :2] = prev_xy
    rows.append(tail)
    recording = Trajectory(schema, np.vstack(rows), label=key)
    return endpoints, recording


def touch_strokes(
    lengths: list[float],
    angles_deg: list[float],
    spec: SyntheticStrokeSpec,
    n_samples: int,
    rng: np.random.Generator | None = None,
    sample_period: float = 0.01,
) -> list[Trajectory]:
    """Length x angle grid of origin-anchored touch strokes (training variety)."""
    out = []
    for length in lengths:
        for angle in angles_deg:
            s = SyntheticStrokeSpec(
                kind=spec.kind,
                length=length,
                angle_deg=angle,
                amplitude=spec.amplitude,
                periods=spec.periods,
                force_peak=spec.force_peak,
                force_profile=spec.force_profile,
                noise_sigma=spec.noise_sigma,
            )
            out.append(make_stroke(s, n_samples, rng, sample_period=sample_period))
    return out
