"""Plain-text dataset files: versioned header with the channel schema, then rows per sample.

Format (UTF-8, tab-separated):

    # strokegen dataset v1
    # kind: strokes
    # sample_period: 0.008
    # channels: x:m:position y:m:position f_z:N:force
    @traj label=rec0
    0.0\t0.0\t0.5
    ...

``kind`` distinguishes stroke records from endpoint-pair sequences.
Floats are written with ``repr`` so read/write round-trips are exact.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Channel, ChannelSchema, SchemaError, StrokeEndpoints, Trajectory

FORMAT_LINE = "# strokegen dataset v1"
KIND_STROKES = "strokes"
KIND_RECORDINGS = "recordings"
KIND_ENDPOINTS = "endpoints"


class DatasetFormatError(ValueError):
    pass


def _schema_header(schema: ChannelSchema) -> str:
    chans = " ".join(f"{c.name}:{c.unit}:{c.role}" for c in schema.channels)
    return chans


def _parse_channels(text: str) -> tuple[Channel, ...]:
    channels = []
    for token in text.split():
        parts = token.split(":")
        if len(parts) != 3:
            raise DatasetFormatError(f"bad channel token {token!r}")
        channels.append(Channel(parts[0], parts[1], parts[2]))
    return tuple(channels)


def write_dataset(
    path: str | Path,
    trajectories: Sequence[Trajectory],
    kind: str = KIND_STROKES,
    header_comments: Sequence[str] = (),
) -> None:
    if not trajectories:
        raise ValueError("refusing to write an empty dataset")
    schema = trajectories[0].schema
    for t in trajectories[1:]:
        if t.schema.names != schema.names:
            raise SchemaError("mixed schemas in one dataset file")
    buf = io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    buf.write(f"# kind: {kind}\n")
    buf.write(f"# sample_period: {schema.sample_period!r}\n")
    buf.write(f"# channels: {_schema_header(schema)}\n")
    for comment in header_comments:
        buf.write(f"# {comment}\n")
    for traj in trajectories:
        buf.write(f"@traj label={traj.label}\n")
        for row in traj.values:
            buf.write("\t".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_dataset(path: str | Path) -> tuple[list[Trajectory], str]:
    """Returns (trajectories, kind)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise DatasetFormatError(f"{path}: not a strokegen dataset (missing version line)")
    kind = KIND_STROKES
    sample_period = None
    channels = None
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if body.startswith("kind:"):
            kind = body.split(":", 1)[1].strip()
        elif body.startswith("sample_period:"):
            sample_period = float(body.split(":", 1)[1].strip())
        elif body.startswith("channels:"):
            channels = _parse_channels(body.split(":", 1)[1])
        i += 1
    if sample_period is None or channels is None:
        raise DatasetFormatError(f"{path}: header missing sample_period or channels")
    schema = ChannelSchema(channels, sample_period)

    trajectories: list[Trajectory] = []
    label = ""
    rows: list[list[float]] = []

    def flush():
        if rows:
            trajectories.append(Trajectory(schema, np.array(rows), label))

    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("@traj"):
            flush()
            rows = []
            label = ""
            for token in line.split()[1:]:
                if token.startswith("label="):
                    label = token[len("label="):]
            continue
        rows.append([float(v) for v in line.split("\t")])
    flush()
    if not trajectories:
        raise DatasetFormatError(f"{path}: no trajectory records")
    return trajectories, kind


# ---------------------------------------------------------------------------
# Endpoint-pair sequences reuse the record format with doubled channels
# (start_x, ..., end_x, ...); one record per recording, one row per stroke.

def endpoint_pair_schema(base: ChannelSchema) -> ChannelSchema:
    channels = tuple(Channel(f"start_{c.name}", c.unit, c.role) for c in base.channels) + tuple(
        Channel(f"end_{c.name}", c.unit, c.role) for c in base.channels
    )
    return ChannelSchema(channels, base.sample_period)


def base_schema_from_pairs(pair_schema: ChannelSchema) -> ChannelSchema:
    half = pair_schema.channel_count // 2
    channels = []
    for c in pair_schema.channels[:half]:
        if not c.name.startswith("start_"):
            raise DatasetFormatError(f"not an endpoint-pair schema: channel {c.name!r}")
        channels.append(Channel(c.name[len("start_"):], c.unit, c.role))
    return ChannelSchema(tuple(channels), pair_schema.sample_period)


def sequences_to_records(sequences: list[list[StrokeEndpoints]], base: ChannelSchema) -> list[Trajectory]:
    schema = endpoint_pair_schema(base)
    records = []
    for i, seq in enumerate(sequences):
        rows = np.stack([ep.pair_vector() for ep in seq])
        if rows.shape[0] == 1:  # record format needs two rows; duplicate singletons
            rows = np.vstack([rows, rows])
            records.append(Trajectory(schema, rows, label=f"seq{i}:m1"))
        else:
            records.append(Trajectory(schema, rows, label=f"seq{i}"))
    return records


def records_to_sequences(records: list[Trajectory]) -> tuple[list[list[StrokeEndpoints]], ChannelSchema]:
    base = base_schema_from_pairs(records[0].schema)
    half = base.channel_count
    sequences = []
    for rec in records:
        rows = rec.values[:1] if rec.label.endswith(":m1") else rec.values
        sequences.append(
            [StrokeEndpoints(row[:half], row[half:], m + 1) for m, row in enumerate(rows)]
        )
    return sequences, base
