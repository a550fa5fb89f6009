"""Run configuration: plain-text key=value files, env overrides, provenance.

Model hyperparameter defaults follow the reference training setup (64/256 LSTM
units, 6-D/3-D latents, batch 4/10, 10000/50000 epochs); every CLI command
embeds the effective configuration into its output artifacts.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

ENV_SEED = "STROKEGEN_SEED"
ENV_OUT_DIR = "STROKEGEN_OUT_DIR"


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "."
    # upper (stroke order) model
    point_latent: int = 6
    point_hidden: int = 64
    point_m_max: int = 8
    point_epochs: int = 10000
    point_batch: int = 4
    # lower (touch) model
    traj_latent: int = 3
    traj_hidden: int = 256
    traj_layers: int = 2
    traj_samples: int = 100
    traj_epochs: int = 50000
    traj_batch: int = 10
    traj_condition_force: bool = True
    # optimizer
    learning_rate: float = 1e-3
    grad_clip: float = 5.0
    # segmentation / ingestion
    force_threshold: float = 0.25
    force_channel: str = "f_z"
    min_stroke_samples: int = 5
    target_samples: int = 100
    rotate_step: float = 20.0
    rotate_pivot: str = "origin"  # origin | centroid | "x,y"

    def to_kv(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        return {k: str(v) for k, v in asdict(self).items()}


def _parse_value(raw: str, kind: type):
    raw = raw.strip()
    if kind is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    return kind(raw)


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = body.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Key-value file -> RunConfig, then env vars, then explicit overrides."""
    values: dict[str, str] = {}
    if path is not None:
        values.update(parse_kv(Path(path).read_text(encoding="utf-8")))
    if os.environ.get(ENV_SEED):
        values["seed"] = os.environ[ENV_SEED]
    if os.environ.get(ENV_OUT_DIR):
        values["out_dir"] = os.environ[ENV_OUT_DIR]
    values.update(overrides or {})

    config = RunConfig()
    known = {f.name: f.type for f in fields(config)}
    types = {"int": int, "float": float, "str": str, "bool": bool}
    for key, raw in values.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        kind = types[known[key]] if isinstance(known[key], str) else known[key]
        setattr(config, key, _parse_value(raw, kind))
    return config


def config_comments(config: RunConfig) -> list[str]:
    """Header-comment lines embedding the full config into an artifact."""
    return [f"config: {f.name}={getattr(config, f.name)}" for f in fields(config)]
