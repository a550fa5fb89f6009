"""Command-line pipeline: fixtures -> ingest -> train -> compose -> resample -> replay.

Every command is seeded and embeds its effective configuration into the
artifacts it writes, so re-running with the same inputs reproduces them
byte-for-byte.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import composer, dataset_io, ingestion, model_io, replay
from .config import RunConfig, config_comments, load_config, parse_kv
from .core import Trajectory
from .cvae_traj import TrajConfig, fit_traj_model
from .fixtures import SyntheticStrokeSpec, make_character, touch_strokes
from .nn import TrainingDiverged, make_rng
from .vae_point import PointConfig, fit_point_model


def _existing_file(parser: argparse.ArgumentParser, path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        parser.error(f"no such file: {path}")
    return p


def _write_history(path: Path, history: list[float], config: RunConfig) -> None:
    lines = [f"# {c}" for c in config_comments(config)]
    lines.append("epoch,loss")
    lines.extend(f"{i},{loss!r}" for i, loss in enumerate(history))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _config_from(args: argparse.Namespace, flag_map: dict[str, str]) -> RunConfig:
    overrides = {}
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    return load_config(getattr(args, "config", None), overrides)


def _parse_latent(text: str, dim: int, rng: np.random.Generator) -> np.ndarray:
    if text == "zero":
        return np.zeros(dim)
    if text == "sample":
        return rng.standard_normal(dim)
    values = np.array([float(v) for v in text.split(",")])
    if values.shape != (dim,):
        raise ValueError(f"latent needs {dim} comma-separated floats, got {text!r}")
    return values


def _parse_pivot(text: str, dataset: list[Trajectory]) -> tuple[float, float]:
    if text == "origin":
        return (0.0, 0.0)
    if text == "centroid":
        return ingestion.dataset_centroid(dataset)
    x, y = text.split(",")
    return (float(x), float(y))


# ---------------------------------------------------------------------------
# fixtures

def cmd_fixtures(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    config = _config_from(args, {"seed": "seed"})
    rng = make_rng(config.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    touch = SyntheticStrokeSpec(
        kind=args.touch,
        amplitude=args.amplitude,
        periods=args.periods,
        force_peak=args.force,
        noise_sigma=args.noise,
    )
    comments = config_comments(config)
    if args.kind == "character":
        for copy in range(args.copies):
            shift = rng.normal(scale=args.jitter * args.scale, size=2)
            _, rec = make_character(
                args.letter,
                args.scale,
                rng,
                touch,
                samples_per_stroke=args.samples,
                origin=(float(shift[0]), float(shift[1])),
            )
            rec.label = f"{args.letter}{copy:02d}"
            dataset_io.write_dataset(
                out_dir / f"{args.letter}-{copy:02d}.tsv", [rec], dataset_io.KIND_RECORDINGS, comments
            )
        print(f"wrote {args.copies} {args.letter!r} recordings to {out_dir}")
    else:
        lengths = [float(v) for v in args.lengths.split(",")]
        angles = [float(v) for v in args.angles.split(",")]
        for copy in range(args.copies):
            strokes = touch_strokes(lengths, angles, touch, args.samples, rng)
            for i, s in enumerate(strokes):
                s.label = f"touch{copy:02d}-{i:02d}"
            dataset_io.write_dataset(
                out_dir / f"touch-{copy:02d}.tsv", strokes, dataset_io.KIND_RECORDINGS, comments
            )
        print(f"wrote {args.copies} x {len(lengths) * len(angles)} touch recordings to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# ingest

def cmd_ingest(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    config = _config_from(
        args,
        {
            "seed": "seed",
            "force_threshold": "force_threshold",
            "target_samples": "target_samples",
            "rotate_step": "rotate_step",
            "rotate_pivot": "rotate_pivot",
        },
    )
    in_dir = Path(args.input)
    files = sorted(in_dir.glob("*.tsv")) if in_dir.is_dir() else [_existing_file(parser, args.input)]
    if not files:
        parser.error(f"no .tsv recordings under {args.input}")
    recordings: list[Trajectory] = []
    for f in files:
        records, _ = dataset_io.read_dataset(f)
        recordings.extend(records)

    seg = ingestion.SegmentationConfig(
        force_threshold=config.force_threshold,
        force_channel=config.force_channel,
        min_stroke_samples=config.min_stroke_samples,
    )
    strokes: list[Trajectory] = []
    sequences = []
    for rec in recordings:
        rec_strokes = ingestion.segment_strokes(rec, seg)
        rec_strokes = [ingestion.downsample(s, config.target_samples) for s in rec_strokes]
        sequences.append(ingestion.extract_endpoints(rec_strokes))
        strokes.extend(rec_strokes)

    if config.rotate_step > 0:
        angles = ingestion.rotation_angles(config.rotate_step)
        pivot = _parse_pivot(config.rotate_pivot, strokes)
        augmented = ingestion.augment(strokes, angles, pivot=pivot)
    else:
        augmented = strokes

    comments = config_comments(config)
    out = Path(args.out)
    dataset_io.write_dataset(out, augmented, dataset_io.KIND_STROKES, comments)
    points_out = Path(args.points_out) if args.points_out else out.with_name(out.stem + "-points" + out.suffix)
    base_schema = strokes[0].schema
    dataset_io.write_dataset(
        points_out, dataset_io.sequences_to_records(sequences, base_schema), dataset_io.KIND_ENDPOINTS, comments
    )
    print(f"{len(recordings)} recordings -> {len(augmented)} strokes ({out}), {len(sequences)} endpoint sequences ({points_out})")
    return 0


# ---------------------------------------------------------------------------
# training

def cmd_train_point(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    config = _config_from(
        args,
        {"seed": "seed", "epochs": "point_epochs", "batch": "point_batch", "hidden": "point_hidden", "m_max": "point_m_max"},
    )
    records, kind = dataset_io.read_dataset(_existing_file(parser, args.data))
    if kind != dataset_io.KIND_ENDPOINTS:
        parser.error(f"{args.data}: expected an endpoints dataset, found kind {kind!r}")
    sequences, base_schema = dataset_io.records_to_sequences(records)
    point_config = PointConfig(
        latent_dim=config.point_latent,
        hidden=config.point_hidden,
        m_max=config.point_m_max,
        learning_rate=config.learning_rate,
        grad_clip=config.grad_clip,
    )
    rng = make_rng(config.seed)
    try:
        model, history = fit_point_model(
            sequences, base_schema, point_config, rng, epochs=config.point_epochs, batch_size=config.point_batch
        )
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    model_io.save_model(args.out, model, config.as_dict())
    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".loss.csv")
    _write_history(history_path, history, config)
    final = history[-1] if history else float("nan")
    print(f"trained point model on {len(sequences)} sequences; final loss {final:.6g} -> {args.out}")
    return 0


def cmd_train_traj(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    config = _config_from(
        args,
        {
            "seed": "seed",
            "epochs": "traj_epochs",
            "batch": "traj_batch",
            "hidden": "traj_hidden",
            "layers": "traj_layers",
        },
    )
    records, kind = dataset_io.read_dataset(_existing_file(parser, args.data))
    if kind == dataset_io.KIND_ENDPOINTS:
        parser.error(f"{args.data}: expected a strokes dataset, found endpoints")
    lengths = {len(r) for r in records}
    if len(lengths) != 1:
        parser.error(f"{args.data}: strokes must share one length, found {sorted(lengths)}")
    n = lengths.pop()
    offset = [ingestion.offset_to_origin(r)[0] for r in records]
    traj_config = TrajConfig(
        latent_dim=config.traj_latent,
        hidden=config.traj_hidden,
        layers=config.traj_layers,
        n_samples=n,
        condition_force=config.traj_condition_force,
        learning_rate=config.learning_rate,
        grad_clip=config.grad_clip,
    )
    rng = make_rng(config.seed)
    try:
        model, history = fit_traj_model(offset, traj_config, rng, epochs=config.traj_epochs, batch_size=config.traj_batch)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    model_io.save_model(args.out, model, config.as_dict())
    history_path = Path(args.history) if args.history else Path(args.out).with_suffix(".loss.csv")
    _write_history(history_path, history, config)
    final = history[-1] if history else float("nan")
    print(f"trained traj model on {len(offset)} strokes (N={n}); final loss {final:.6g} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# generation

def cmd_compose(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    config = _config_from(args, {"seed": "seed"})
    rng = make_rng(config.seed)
    traj_model = model_io.load_traj_model(_existing_file(parser, args.traj_model))
    point_paths = [_existing_file(parser, p) for p in args.point_model]
    if len(point_paths) > 1 and "{}" not in args.out:
        parser.error("multiple point models need an --out pattern containing {}")
    for path in point_paths:
        point_model = model_io.load_point_model(path)
        z_point = _parse_latent(args.z_point, point_model.config.latent_dim, rng)
        z_traj = _parse_latent(args.z_traj, traj_model.config.latent_dim, rng)
        plan = composer.ComposedPlan(
            point_model, traj_model, z_point, args.strokes, [z_traj] * args.strokes
        )
        out = composer.compose(plan)
        target = Path(args.out.replace("{}", path.stem))
        comments = config_comments(config) + [
            f"z_point: {','.join(repr(v) for v in z_point)}",
            f"z_traj: {','.join(repr(v) for v in z_traj)}",
            f"point_model: {path.name}",
            f"traj_model: {Path(args.traj_model).name}",
        ]
        if target.suffix == ".svg":
            composer.write_svg(target, out, comments)
        else:
            composer.write_csv(target, out, comments)
        print(f"composed {args.strokes} strokes -> {target}")
    return 0


def cmd_resample(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    traj = composer.read_csv(_existing_file(parser, args.input))
    out = composer.resample_spline(traj, args.period_ms / 1000.0, add_velocities=not args.no_velocities)
    composer.write_csv(args.out, out, [f"resampled: period_ms={args.period_ms}"])
    total = sum(len(s) for s in out.strokes)
    print(f"resampled {len(out)} strokes to {args.period_ms} ms grid ({total} samples) -> {args.out}")
    return 0


def cmd_replay(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    traj = composer.read_csv(_existing_file(parser, args.traj))
    gains = replay.ControllerGains()
    if args.gains:
        gains = _gains_from_file(_existing_file(parser, args.gains))
    options = replay.ReplayOptions(
        force_control=args.force_control == "on",
        height_offset=args.height_offset_mm / 1000.0,
        disturbance=np.array([float(v) for v in args.disturbance.split(",")]),
        k_env=args.k_env,
        surface_height=args.surface_z,
        dob_enabled=args.dob == "on",
    )
    log = replay.run_replay(gains, traj, options)
    comments = [
        f"force_control: {args.force_control}",
        f"height_offset_mm: {args.height_offset_mm}",
        f"k_env: {args.k_env}",
        f"dob: {args.dob}",
    ]
    log.write_csv(args.out, comments)
    if len(log):
        f_err = float(np.mean(np.abs(log.column("f_contact")[-200:] - log.column("f_cmd")[-200:])))
        print(f"replayed {len(log)} steps; mean steady force error {f_err:.4g} N -> {args.out}")
    else:
        print(f"replayed 0 steps -> {args.out}")
    return 0


def _gains_from_file(path: Path) -> replay.ControllerGains:
    values = parse_kv(path.read_text(encoding="utf-8"))

    def triple(key: str, default):
        if key not in values:
            return default
        parts = [float(v) for v in values[key].split()]
        return np.array(parts[:3]) if len(parts) >= 3 else np.full(3, parts[0])

    kf = values.get("Kf", "0.15").split()
    kf_z = float(kf[2]) if len(kf) >= 3 else float(kf[0])
    return replay.ControllerGains(
        kp=triple("Kp", np.array([500.0, 500.0, 100.0])),
        kd=triple("Kd", np.array([35.0, 35.0, 200.0])),
        kf_z=kf_z,
        inertia=triple("I", np.array([1.6, 0.72, 0.32])),
        deriv_cutoff_hz=float(values.get("g", 10.0)),
        ts=float(values.get("Ts", 0.001)),
    )


def cmd_export(parser: argparse.ArgumentParser, args: argparse.Namespace) -> int:
    traj = composer.read_csv(_existing_file(parser, args.input))
    if args.format == "svg":
        composer.write_svg(args.out, traj)
    else:
        composer.write_csv(args.out, traj)
    print(f"exported {len(traj)} strokes -> {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strokegen",
        description="Hierarchical stroke-order / touch trajectory learning, generation, and replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="emit synthetic recordings")
    p.add_argument("--kind", choices=["character", "touch"], required=True)
    p.add_argument("--letter", default="A")
    p.add_argument("--copies", type=int, default=10)
    p.add_argument("--scale", type=float, default=0.1)
    p.add_argument("--lengths", default="0.06,0.14")
    p.add_argument("--angles", default="0,30,60")
    p.add_argument("--touch", choices=["straight", "zigzag", "arc"], default="straight")
    p.add_argument("--amplitude", type=float, default=0.0)
    p.add_argument("--periods", type=int, default=3)
    p.add_argument("--force", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0, help="per-copy placement jitter (fraction of scale)")
    p.add_argument("--samples", type=int, default=80)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("ingest", help="segment recordings into training datasets")
    p.add_argument("--input", required=True, help="directory of .tsv recordings (or one file)")
    p.add_argument("--force-threshold", dest="force_threshold", type=float, default=None)
    p.add_argument("--target-samples", dest="target_samples", type=int, default=None)
    p.add_argument("--rotate-step", dest="rotate_step", type=float, default=None, help="0 disables augmentation")
    p.add_argument("--rotate-pivot", dest="rotate_pivot", default=None, help="origin | centroid | x,y")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="strokes dataset file")
    p.add_argument("--points-out", default=None, help="endpoint-sequence dataset file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-point", help="train the stroke-order model")
    p.add_argument("--data", required=True, help="endpoints dataset")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--history", default=None, help="loss history CSV (default: <out>.loss.csv)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--m-max", dest="m_max", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train_point)

    p = sub.add_parser("train-traj", help="train the touch model")
    p.add_argument("--data", required=True, help="strokes dataset")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--history", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_train_traj)

    p = sub.add_parser("compose", help="generate trajectories by chaining the decoders")
    p.add_argument("--point-model", nargs="+", required=True)
    p.add_argument("--traj-model", required=True)
    p.add_argument("--strokes", type=int, required=True, help="stroke count m")
    p.add_argument("--z-point", default="zero", help="'zero', 'sample', or comma-separated floats")
    p.add_argument("--z-traj", default="zero", help="'zero', 'sample', or comma-separated floats")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help=".csv or .svg; use {} with multiple point models")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("resample", help="spline-resample a composed trajectory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--period-ms", dest="period_ms", type=float, default=1.0)
    p.add_argument("--no-velocities", action="store_true", help="skip v_x/v_y derivation")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("replay", help="replay through the impedance-controlled plant")
    p.add_argument("--traj", required=True, help="1 ms trajectory CSV")
    p.add_argument("--gains", default=None, help="key-value gains file (Kp/Kd/Kf/I/g/Ts)")
    p.add_argument("--force-control", dest="force_control", choices=["on", "off"], default="on")
    p.add_argument("--height-offset-mm", dest="height_offset_mm", type=float, default=0.0)
    p.add_argument("--k-env", dest="k_env", type=float, default=1e4)
    p.add_argument("--surface-z", dest="surface_z", type=float, default=0.0)
    p.add_argument("--dob", choices=["on", "off"], default="on")
    p.add_argument("--disturbance", default="0,0,0", help="constant per-axis force [N]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("export", help="convert a trajectory CSV to SVG or CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["svg", "csv"], default="svg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
