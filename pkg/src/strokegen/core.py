"""Shared domain types: channel schemas, trajectories, endpoint pairs, normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ROLE_POSITION = "position"
ROLE_FORCE = "force"
ROLE_VELOCITY = "velocity"
ROLE_OTHER = "other"
_ROLES = (ROLE_POSITION, ROLE_FORCE, ROLE_VELOCITY, ROLE_OTHER)

# Channel ranges below this width are treated as constant and get unit scale,
# so normalization never divides by a vanishing half-range.
DEGENERATE_RANGE = 1e-9


class SchemaError(ValueError):
    """Raised when data does not conform to its channel schema."""


@dataclass(frozen=True)
class Channel:
    name: str
    unit: str
    role: str = ROLE_OTHER

    def __post_init__(self):
        if not self.name or any(c.isspace() or c == ":" for c in self.name):
            raise SchemaError(f"invalid channel name {self.name!r}")
        if self.role not in _ROLES:
            raise SchemaError(f"unknown channel role {self.role!r}")


@dataclass(frozen=True)
class ChannelSchema:
    """Ordered channel descriptions plus the sample period in seconds."""

    channels: tuple[Channel, ...]
    sample_period: float

    def __post_init__(self):
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise SchemaError("channel names must be unique")
        if not self.sample_period > 0:
            raise SchemaError("sample_period must be positive")

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    def indices(self, role: str) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.channels) if c.role == role)

    @property
    def position_indices(self) -> tuple[int, ...]:
        return self.indices(ROLE_POSITION)

    @property
    def force_indices(self) -> tuple[int, ...]:
        return self.indices(ROLE_FORCE)

    @property
    def velocity_indices(self) -> tuple[int, ...]:
        return self.indices(ROLE_VELOCITY)

    @property
    def plane_indices(self) -> tuple[int, int]:
        """Indices of the x-y drawing plane: the first two position channels."""
        pos = self.position_indices
        if len(pos) < 2:
            raise SchemaError("schema has no 2-D drawing plane (need two position channels)")
        return pos[0], pos[1]

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.channels):
            if c.name == name:
                return i
        raise SchemaError(f"no channel named {name!r}")

    def with_sample_period(self, period: float) -> "ChannelSchema":
        return ChannelSchema(self.channels, period)


def make_schema(specs: Iterable[tuple[str, str, str]], sample_period: float) -> ChannelSchema:
    """Build a schema from (name, unit, role) triples."""
    return ChannelSchema(tuple(Channel(*s) for s in specs), sample_period)


# The x / y / f_z command set the replay controller consumes.
def default_schema(sample_period: float = 0.008) -> ChannelSchema:
    return make_schema(
        [("x", "m", ROLE_POSITION), ("y", "m", ROLE_POSITION), ("f_z", "N", ROLE_FORCE)],
        sample_period,
    )


@dataclass
class Trajectory:
    """Fixed-schema multichannel time series; ``values`` has shape (N, channels)."""

    schema: ChannelSchema
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise SchemaError("trajectory values must be 2-D (samples x channels)")
        if self.values.shape[0] < 2:
            raise SchemaError("trajectory needs at least 2 samples")
        if self.values.shape[1] != self.schema.channel_count:
            raise SchemaError(
                f"sample width {self.values.shape[1]} != schema channels {self.schema.channel_count}"
            )
        if not np.all(np.isfinite(self.values)):
            raise SchemaError("trajectory contains non-finite values")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.schema.sample_period

    def copy(self) -> "Trajectory":
        return Trajectory(self.schema, self.values.copy(), self.label, dict(self.meta))

    def path_length(self) -> float:
        """Planar (x-y) arc length."""
        ix, iy = self.schema.plane_indices
        xy = self.values[:, [ix, iy]]
        return float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))


@dataclass
class StrokeEndpoints:
    """Start/end sample pair of one stroke; stroke_index is 1-based stroke order."""

    start: np.ndarray
    end: np.ndarray
    stroke_index: int

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        if self.start.shape != self.end.shape or self.start.ndim != 1:
            raise SchemaError("start and end must be 1-D vectors of equal length")
        if self.stroke_index < 1:
            raise SchemaError("stroke_index is 1-based and must be positive")

    def pair_vector(self) -> np.ndarray:
        """Concatenated (start, end) vector, the per-step input of the point model."""
        return np.concatenate([self.start, self.end])

    def chord(self, schema: ChannelSchema) -> np.ndarray:
        ix, iy = schema.plane_indices
        return np.array([self.end[ix] - self.start[ix], self.end[iy] - self.start[iy]])


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel affine map: normalized = (value - offset) / scale."""

    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=np.float64))
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64))
        if self.offset.shape != self.scale.shape or self.offset.ndim != 1:
            raise SchemaError("offset and scale must be 1-D vectors of equal length")
        if not np.all(self.scale > 0):
            raise SchemaError("scale entries must be strictly positive")

    @property
    def width(self) -> int:
        return self.offset.shape[0]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.offset) / self.scale

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.scale + self.offset


def fit_stats(dataset: Sequence[Trajectory]) -> NormalizationStats:
    """Midrange/half-range stats so the mapped dataset lies within [-1, 1].

    Constant channels (range below ``DEGENERATE_RANGE``) get scale 1.
    """
    if not dataset:
        raise ValueError("cannot fit stats on an empty dataset")
    schema = dataset[0].schema
    for traj in dataset[1:]:
        if traj.schema.names != schema.names:
            raise SchemaError("dataset trajectories have mismatched schemas")
    stacked = np.vstack([t.values for t in dataset])
    return fit_stats_array(stacked)


def fit_stats_array(stacked: np.ndarray) -> NormalizationStats:
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    offset = (hi + lo) / 2.0
    scale = (hi - lo) / 2.0
    scale = np.where(scale < DEGENERATE_RANGE, 1.0, scale)
    return NormalizationStats(offset, scale)


def normalize(traj: Trajectory, stats: NormalizationStats) -> Trajectory:
    if stats.width != traj.schema.channel_count:
        raise SchemaError("stats width does not match trajectory schema")
    return Trajectory(traj.schema, stats.apply(traj.values), traj.label, dict(traj.meta))


def denormalize(traj: Trajectory, stats: NormalizationStats) -> Trajectory:
    if stats.width != traj.schema.channel_count:
        raise SchemaError("stats width does not match trajectory schema")
    return Trajectory(traj.schema, stats.invert(traj.values), traj.label, dict(traj.meta))
