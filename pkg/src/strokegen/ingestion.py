"""Recording preprocessing: contact-force segmentation, endpoint extraction,
downsampling, start-point offsetting, and geometric augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SchemaError, StrokeEndpoints, Trajectory


class SegmentationError(ValueError):
    pass


@dataclass
class SegmentationConfig:
    force_threshold: float = 0.25  # N
    force_channel: str = "f_z"
    min_stroke_samples: int = 5  # rejects threshold-crossing noise blips

    def __post_init__(self):
        if self.force_threshold <= 0:
            raise ValueError("force_threshold must be positive")
        if self.min_stroke_samples < 2:
            raise ValueError("min_stroke_samples must be at least 2")


def segment_strokes(rec: Trajectory, cfg: SegmentationConfig) -> list[Trajectory]:
    """Maximal contiguous runs with contact force >= threshold, in order.

    Inter-stroke travel (force below threshold) is discarded; runs shorter
    than min_stroke_samples are dropped as noise.
    """
    idx = rec.schema.index_of(cfg.force_channel)
    if rec.schema.channels[idx].role != "force":
        raise SchemaError(f"channel {cfg.force_channel!r} is not a force channel")
    contact = rec.values[:, idx] >= cfg.force_threshold
    strokes: list[Trajectory] = []
    edges = np.flatnonzero(np.diff(contact.astype(np.int8)))
    starts = [0] if contact[0] else []
    starts += [int(e) + 1 for e in edges if not contact[e]]
    ends = [int(e) + 1 for e in edges if contact[e]]
    if contact[-1]:
        ends.append(len(rec))
    for m, (a, b) in enumerate(zip(starts, ends)):
        if b - a < cfg.min_stroke_samples:
            continue
        strokes.append(Trajectory(rec.schema, rec.values[a:b].copy(), label=f"{rec.label}/s{len(strokes)}"))
    if not strokes:
        raise SegmentationError(
            f"no stroke found: contact force never holds >= {cfg.force_threshold} N "
            f"for {cfg.min_stroke_samples} samples"
        )
    return strokes


def extract_endpoints(strokes: list[Trajectory]) -> list[StrokeEndpoints]:
    """First/last sample of each stroke, preserving stroke order."""
    if not strokes:
        raise ValueError("empty stroke list")
    return [
        StrokeEndpoints(s.values[0].copy(), s.values[-1].copy(), m)
        for m, s in enumerate(strokes, start=1)
    ]


def downsample(traj: Trajectory, target_n: int) -> Trajectory:
    """Uniform index selection to target_n samples; endpoints preserved bit-exactly.

    Nearest-index picking (no averaging) keeps every retained sample equal to a
    source sample, which endpoint extraction depends on. The sample period is
    rescaled to keep the duration unchanged.
    """
    n = len(traj)
    if target_n < 2:
        raise ValueError("target_n must be at least 2")
    if target_n > n:
        raise ValueError(f"cannot downsample {n} samples to {target_n}")
    idx = np.rint(np.linspace(0, n - 1, target_n)).astype(int)
    period = traj.schema.sample_period * (n - 1) / (target_n - 1)
    return Trajectory(traj.schema.with_sample_period(period), traj.values[idx].copy(), traj.label)


def offset_to_origin(traj: Trajectory) -> tuple[Trajectory, np.ndarray]:
    """Subtracts the first sample on position channels only; returns (offset, start).

    Force channels keep their profile: zeroing them at the stroke start would
    destroy the contact-force information.
    """
    start = traj.values[0].copy()
    values = traj.values.copy()
    pos = list(traj.schema.position_indices)
    values[:, pos] -= start[pos]
    return Trajectory(traj.schema, values, traj.label, dict(traj.meta)), start


def add_start_back(traj: Trajectory, start: np.ndarray) -> Trajectory:
    values = traj.values.copy()
    pos = list(traj.schema.position_indices)
    values[:, pos] += np.asarray(start)[pos]
    return Trajectory(traj.schema, values, traj.label, dict(traj.meta))


def rotate_trajectory(traj: Trajectory, angle_deg: float, pivot: tuple[float, float] = (0.0, 0.0)) -> Trajectory:
    """Rotates x-y position (about pivot) and x-y velocity channels (frame-attached)."""
    if angle_deg % 360.0 == 0.0:
        return traj.copy()
    theta = np.deg2rad(angle_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    values = traj.values.copy()
    ix, iy = traj.schema.plane_indices
    xy = values[:, [ix, iy]] - np.asarray(pivot)
    values[:, [ix, iy]] = xy @ rot.T + np.asarray(pivot)
    vel = traj.schema.velocity_indices
    if len(vel) >= 2:
        values[:, [vel[0], vel[1]]] = values[:, [vel[0], vel[1]]] @ rot.T
    return Trajectory(traj.schema, values, traj.label, dict(traj.meta))


def translate_trajectory(traj: Trajectory, shift: tuple[float, float]) -> Trajectory:
    if shift[0] == 0.0 and shift[1] == 0.0:
        return traj.copy()
    values = traj.values.copy()
    ix, iy = traj.schema.plane_indices
    values[:, ix] += shift[0]
    values[:, iy] += shift[1]
    return Trajectory(traj.schema, values, traj.label, dict(traj.meta))


def augment(
    dataset: list[Trajectory],
    angles_deg: list[float],
    translations: list[tuple[float, float]] | None = None,
    pivot: tuple[float, float] = (0.0, 0.0),
) -> list[Trajectory]:
    """Rotation/translation padding: |dataset| x |angles| x |translations| outputs.

    Rotation is about ``pivot`` (the plane origin by default), leaves force
    channels untouched, and preserves planar distances from the pivot. The
    identity element (angle 0, zero shift) reproduces its input bit-exactly.
    """
    if not angles_deg:
        raise ValueError("empty angle list")
    translations = translations or [(0.0, 0.0)]
    out = []
    for traj in dataset:
        for angle in angles_deg:
            rotated = rotate_trajectory(traj, angle, pivot)
            for shift in translations:
                out.append(translate_trajectory(rotated, shift))
    return out


def dataset_centroid(dataset: list[Trajectory]) -> tuple[float, float]:
    """Mean x-y position over every sample of every trajectory."""
    ix, iy = dataset[0].schema.plane_indices
    stacked = np.vstack([t.values[:, [ix, iy]] for t in dataset])
    center = stacked.mean(axis=0)
    return float(center[0]), float(center[1])


def rotation_angles(step_deg: float) -> list[float]:
    """Full-turn rotation grid: 0, step, ... < 360."""
    if step_deg <= 0 or step_deg > 360:
        raise ValueError("rotation step must be in (0, 360]")
    count = int(round(360.0 / step_deg))
    return [step_deg * k for k in range(count)]
