"""Versioned model files: one JSON container for both model kinds.

The container carries the channel schema, normalization stats, hyperparameters,
the run configuration that produced the model, and flat float64 parameter
arrays (base64, little-endian) in declared order. Identical training runs
serialize byte-for-byte identically.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .core import Channel, ChannelSchema, NormalizationStats
from .cvae_traj import TrajConfig, TrajModel
from .vae_point import PointConfig, PointModel

MODEL_FORMAT = "strokegen-model"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(data.tobytes()).decode("ascii")}


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).copy()


def _schema_to_json(schema: ChannelSchema) -> dict:
    return {
        "sample_period": schema.sample_period,
        "channels": [[c.name, c.unit, c.role] for c in schema.channels],
    }


def _schema_from_json(obj: dict) -> ChannelSchema:
    return ChannelSchema(tuple(Channel(*c) for c in obj["channels"]), obj["sample_period"])


def save_model(path: str | Path, model: PointModel | TrajModel, run_config: dict | None = None) -> None:
    if isinstance(model, PointModel):
        kind = "point"
    elif isinstance(model, TrajModel):
        kind = "traj"
    else:
        raise TypeError(f"not a model: {type(model)!r}")
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": kind,
        "schema": _schema_to_json(model.schema),
        "stats": {"offset": model.stats.offset.tolist(), "scale": model.stats.scale.tolist()},
        "hyper": asdict(model.config),
        "run_config": dict(run_config or {}),
        "param_order": list(model.params),
        "params": {name: _encode_array(value) for name, value in model.params.items()},
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> PointModel | TrajModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a model file ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')}")
    schema = _schema_from_json(doc["schema"])
    stats = NormalizationStats(np.array(doc["stats"]["offset"]), np.array(doc["stats"]["scale"]))
    params = {name: _decode_array(doc["params"][name]) for name in doc["param_order"]}
    if doc["kind"] == "point":
        model: PointModel | TrajModel = PointModel(schema, stats, PointConfig(**doc["hyper"]), params)
    elif doc["kind"] == "traj":
        model = TrajModel(schema, stats, TrajConfig(**doc["hyper"]), params)
    else:
        raise ModelFormatError(f"{path}: unknown model kind {doc['kind']!r}")
    model.run_config = doc.get("run_config", {})  # provenance, not part of the dataclass
    return model


def load_point_model(path: str | Path) -> PointModel:
    model = load_model(path)
    if not isinstance(model, PointModel):
        raise ModelFormatError(f"{path}: expected a point model, found traj")
    return model


def load_traj_model(path: str | Path) -> TrajModel:
    model = load_model(path)
    if not isinstance(model, TrajModel):
        raise ModelFormatError(f"{path}: expected a traj model, found point")
    return model
