"""Generation phase: chain the endpoint decoder into the touch decoder, manage
start-point offsets, resample for the 1 ms controller, and export artifacts."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Channel, ChannelSchema, SchemaError, Trajectory
from .cvae_traj import TrajModel, decode_traj
from .ingestion import add_start_back
from .vae_point import PointModel, decode_points


@dataclass
class ComposedPlan:
    point_model: PointModel
    traj_model: TrajModel
    z_point: np.ndarray
    m_count: int
    z_traj: list[np.ndarray] | None = None  # per-stroke; None means prior mean (zeros)

    def __post_init__(self):
        self.z_point = np.asarray(self.z_point, dtype=np.float64)
        if self.z_point.shape != (self.point_model.config.latent_dim,):
            raise ValueError("z_point dimension does not match the point model")
        if self.z_traj is not None and len(self.z_traj) != self.m_count:
            raise ValueError("need one z_traj per stroke")
        check_compatible(self.point_model, self.traj_model)


def check_compatible(point_model: PointModel, traj_model: TrajModel) -> None:
    if point_model.schema.names != traj_model.schema.names:
        raise SchemaError(
            f"model schemas are incompatible: {point_model.schema.names} vs {traj_model.schema.names}"
        )


@dataclass
class MultiStrokeTrajectory:
    """Ordered strokes in workspace coordinates; pen-up travel is implicit."""

    strokes: list[Trajectory]
    meta: dict = field(default_factory=dict)

    @property
    def schema(self) -> ChannelSchema:
        return self.strokes[0].schema

    def __len__(self) -> int:
        return len(self.strokes)


def compose(plan: ComposedPlan) -> MultiStrokeTrajectory:
    """Decode endpoints, feed each offset endpoint into the touch decoder, add
    the start point back. Stroke m starts exactly at the decoded start."""
    endpoints = decode_points(plan.point_model, plan.z_point, plan.m_count)
    strokes = []
    j = plan.traj_model.config.latent_dim
    for m, ep in enumerate(endpoints):
        z = np.zeros(j) if plan.z_traj is None else np.asarray(plan.z_traj[m], dtype=np.float64)
        offset_endpoint = ep.end.copy()
        pos = list(plan.traj_model.schema.position_indices)
        offset_endpoint[pos] -= ep.start[pos]
        stroke = decode_traj(plan.traj_model, z, offset_endpoint)
        stroke = add_start_back(stroke, ep.start)
        stroke.label = f"stroke{m + 1}"
        strokes.append(stroke)
    return MultiStrokeTrajectory(strokes, meta={"endpoints": endpoints})


def swap_models(plan: ComposedPlan, new_traj_model: TrajModel) -> ComposedPlan:
    """Same stroke order, different touch: replaces the lower decoder only."""
    check_compatible(plan.point_model, new_traj_model)
    return ComposedPlan(plan.point_model, new_traj_model, plan.z_point.copy(), plan.m_count, plan.z_traj)


# ---------------------------------------------------------------------------
# Resampling

def resample_stroke(stroke: Trajectory, target_period: float, add_velocities: bool = False) -> Trajectory:
    """Natural cubic spline per channel, evaluated on the target-period grid.

    Knot values are reproduced exactly and the sample count becomes
    floor((N-1) * T_src / T_tgt) + 1. With ``add_velocities`` and no existing
    velocity channels, v_x/v_y are appended from the spline's analytic first
    derivative (the 1 ms controller consumes them directly). Strokes with
    fewer than 4 samples fall back to linear interpolation.
    """
    src_period = stroke.schema.sample_period
    if target_period >= src_period:
        raise ValueError("target period must be shorter than the source period")
    n = len(stroke)
    times = np.arange(n) * src_period
    # the 1e-9 snap keeps exact-integer period ratios from truncating one short
    count = int(np.floor((n - 1) * src_period / target_period + 1e-9)) + 1
    grid = np.arange(count) * target_period

    if n < 4:
        values = np.column_stack([np.interp(grid, times, stroke.values[:, k]) for k in range(stroke.values.shape[1])])
        stroke.meta["resample_fallback"] = "linear (fewer than 4 source samples)"
        splines = None
    else:
        splines = [CubicSpline(times, stroke.values[:, k], bc_type="natural") for k in range(stroke.values.shape[1])]
        values = np.column_stack([s(grid) for s in splines])
    # knots land exactly on the grid every lcm step; pin them to the source values
    knot_pos = times / target_period
    on_grid = np.abs(knot_pos - np.rint(knot_pos)) < 1e-9
    values[np.rint(knot_pos[on_grid]).astype(int)] = stroke.values[on_grid]

    schema = stroke.schema.with_sample_period(target_period)
    if add_velocities and not stroke.schema.velocity_indices and splines is not None:
        ix, iy = stroke.schema.plane_indices
        vx = splines[ix](grid, 1)
        vy = splines[iy](grid, 1)
        values = np.column_stack([values, vx, vy])
        channels = schema.channels + (
            Channel("v_x", "m/s", "velocity"),
            Channel("v_y", "m/s", "velocity"),
        )
        schema = ChannelSchema(channels, target_period)
    return Trajectory(schema, values, stroke.label, dict(stroke.meta))


def resample_spline(
    traj: MultiStrokeTrajectory, target_period: float = 0.001, add_velocities: bool = False
) -> MultiStrokeTrajectory:
    strokes = [resample_stroke(s, target_period, add_velocities) for s in traj.strokes]
    return MultiStrokeTrajectory(strokes, dict(traj.meta))


# ---------------------------------------------------------------------------
# Export

def write_csv(path: str | Path, traj: MultiStrokeTrajectory, header_comments: list[str] | None = None) -> None:
    """Deterministic CSV: one row per sample, stroke index column, exact floats."""
    buf = io.StringIO()
    for comment in header_comments or []:
        buf.write(f"# {comment}\n")
    if traj.strokes:
        schema = traj.schema
        buf.write(f"# sample_period: {schema.sample_period!r}\n")
        buf.write("# channels: " + " ".join(f"{c.name}:{c.unit}:{c.role}" for c in schema.channels) + "\n")
        buf.write("stroke,t," + ",".join(schema.names) + "\n")
        for k, stroke in enumerate(traj.strokes, start=1):
            for i, row in enumerate(stroke.values):
                t = i * schema.sample_period
                buf.write(f"{k},{t!r}," + ",".join(repr(float(v)) for v in row) + "\n")
    else:
        buf.write("stroke,t\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_csv(path: str | Path) -> MultiStrokeTrajectory:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    sample_period = None
    channels: tuple[Channel, ...] | None = None
    rows_by_stroke: dict[int, list[list[float]]] = {}
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sample_period:"):
                sample_period = float(body.split(":", 1)[1])
            elif body.startswith("channels:"):
                channels = tuple(
                    Channel(*token.split(":")) for token in body.split(":", 1)[1].split()
                )
            continue
        if not line or line.startswith("stroke,"):
            continue
        parts = line.split(",")
        stroke_idx = int(parts[0])
        rows_by_stroke.setdefault(stroke_idx, []).append([float(v) for v in parts[2:]])
    if sample_period is None or channels is None or not rows_by_stroke:
        raise ValueError(f"{path}: not a strokegen trajectory CSV")
    schema = ChannelSchema(channels, sample_period)
    strokes = [
        Trajectory(schema, np.array(rows_by_stroke[k]), label=f"stroke{k}")
        for k in sorted(rows_by_stroke)
    ]
    return MultiStrokeTrajectory(strokes)


def write_svg(path: str | Path, traj: MultiStrokeTrajectory, header_comments: list[str] | None = None) -> None:
    """One polyline per stroke; mean contact force maps to stroke width."""
    buf = io.StringIO()
    buf.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    for comment in header_comments or []:
        buf.write(f"<!-- {comment} -->\n")
    if not traj.strokes:
        buf.write('<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1 1"/>\n')
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
        return
    schema = traj.schema
    ix, iy = schema.plane_indices
    force_idx = schema.force_indices
    all_xy = np.vstack([s.values[:, [ix, iy]] for s in traj.strokes])
    lo = all_xy.min(axis=0)
    hi = all_xy.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * float(span.max())
    buf.write(
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="%.6g %.6g %.6g %.6g">\n'
        % (lo[0] - pad, -(hi[1] + pad), span[0] + 2 * pad, span[1] + 2 * pad)
    )
    width_scale = 0.01 * float(span.max())
    for stroke in traj.strokes:
        width = width_scale
        if force_idx:
            width = width_scale * max(0.2, float(np.mean(stroke.values[:, force_idx[0]])))
        pts = " ".join("%.6g,%.6g" % (row[ix], -row[iy]) for row in stroke.values)
        buf.write(
            f'<polyline fill="none" stroke="black" stroke-width="{width:.6g}" '
            f'stroke-linecap="round" points="{pts}"/>\n'
        )
    buf.write("</svg>\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
