"""Axis-decoupled impedance-controlled plant with a unilateral environment
spring and a velocity-based disturbance observer, replaying composed
trajectories at the 1 ms controller rate.

Per planar axis the acceleration reference is Kp*(x_cmd - x) + Kd*(v_cmd - v);
the z axis tracks contact force through Kf (or a position command when force
control is off). The DOB estimates the lumped disturbance (contact reaction
plus externals) through a first-order low-pass and feeds its negation back.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .composer import MultiStrokeTrajectory

AXES = ("x", "y", "z")


@dataclass
class ControllerGains:
    kp: np.ndarray = field(default_factory=lambda: np.array([500.0, 500.0, 100.0]))  # [1/s^2]
    kd: np.ndarray = field(default_factory=lambda: np.array([35.0, 35.0, 200.0]))  # [1/s]
    kf_z: float = 0.15  # [m/(N s^2)], z axis only
    inertia: np.ndarray = field(default_factory=lambda: np.array([1.6, 0.72, 0.32]))  # [kg]
    deriv_cutoff_hz: float = 10.0  # velocity filter and DOB cutoff g
    ts: float = 0.001  # [s]

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=np.float64)
        self.kd = np.asarray(self.kd, dtype=np.float64)
        self.inertia = np.asarray(self.inertia, dtype=np.float64)
        if np.any(self.kp < 0) or np.any(self.kd < 0) or self.kf_z < 0:
            raise ValueError("gains must be nonnegative")
        if not self.ts > 0:
            raise ValueError("sample time must be positive")
        if np.any(self.inertia <= 0):
            raise ValueError("inertias must be positive")


@dataclass
class Command:
    x: float = 0.0
    y: float = 0.0
    f_z: float = 0.0
    v_x: float = 0.0
    v_y: float = 0.0
    z: float | None = None  # position command for force-off replay

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.f_z, self.v_x, self.v_y])


@dataclass
class PlantState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel_filtered: np.ndarray = field(default_factory=lambda: np.zeros(3))
    k_env: float = 1e4  # [N/m]
    surface_height: float = 0.0  # [m]
    dob_lowpass: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dob_estimate: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def contact_force(self) -> float:
        """Unilateral spring: K_env * max(0, penetration), never negative."""
        return self.k_env * max(0.0, self.surface_height - self.position[2])


def dob_step(
    lowpass: np.ndarray,
    nominal_inertia: np.ndarray,
    applied_acc: np.ndarray,
    measured_velocity: np.ndarray,
    previous_velocity: np.ndarray,
    cutoff_hz: float,
    ts: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One velocity-based observer update; returns (new lowpass state, estimate).

    The raw disturbance is the momentum change implied by the measured velocity
    minus the applied force (``applied_acc`` includes the DOB compensation
    itself); a first-order low-pass at ``cutoff_hz`` smooths it. Bounded inputs
    give a bounded estimate.
    """
    if cutoff_hz <= 0:
        raise ValueError("cutoff must be positive")
    omega = 2.0 * np.pi * cutoff_hz
    raw = nominal_inertia * (measured_velocity - previous_velocity) / ts - nominal_inertia * applied_acc
    lowpass = lowpass + ts * omega * (raw - lowpass)
    return lowpass, lowpass.copy()


def control_step(
    gains: ControllerGains,
    state: PlantState,
    command: Command,
    disturbance: np.ndarray | None = None,
    force_control: bool = True,
    dob_enabled: bool = True,
) -> PlantState:
    """One Ts update: impedance law, DOB compensation, semi-implicit Euler."""
    if disturbance is None:
        disturbance = np.zeros(3)
    disturbance = np.asarray(disturbance, dtype=np.float64)
    ts = gains.ts
    omega_f = 2.0 * np.pi * gains.deriv_cutoff_hz
    vel_f = state.vel_filtered + ts * omega_f * (state.velocity - state.vel_filtered)

    f_contact = state.contact_force()
    acc_ref = np.zeros(3)
    acc_ref[0] = gains.kp[0] * (command.x - state.position[0]) + gains.kd[0] * (command.v_x - vel_f[0])
    acc_ref[1] = gains.kp[1] * (command.y - state.position[1]) + gains.kd[1] * (command.v_y - vel_f[1])
    if force_control:
        # positive force error means "press harder": accelerate downward
        acc_ref[2] = -gains.kf_z * (command.f_z - f_contact) - gains.kd[2] * vel_f[2]
    else:
        z_cmd = state.surface_height if command.z is None else command.z
        acc_ref[2] = gains.kp[2] * (z_cmd - state.position[2]) - gains.kd[2] * vel_f[2]

    acc_applied = acc_ref - (state.dob_estimate / gains.inertia if dob_enabled else 0.0)
    external = disturbance + np.array([0.0, 0.0, f_contact])
    acc = acc_applied + external / gains.inertia
    if not np.all(np.isfinite(acc)):
        raise FloatingPointError(f"non-finite plant state at t={state.time}")

    velocity = state.velocity + ts * acc
    position = state.position + ts * velocity
    lowpass, estimate = dob_step(
        state.dob_lowpass, gains.inertia, acc_applied, velocity, state.velocity, gains.deriv_cutoff_hz, ts
    )
    if not dob_enabled:
        estimate = np.zeros(3)
    return replace(
        state,
        position=position,
        velocity=velocity,
        vel_filtered=vel_f,
        dob_lowpass=lowpass,
        dob_estimate=estimate,
        time=state.time + ts,
    )


@dataclass
class ReplayOptions:
    force_control: bool = True
    height_offset: float = 0.0  # [m], shifts the z command (and initial height)
    disturbance: np.ndarray = field(default_factory=lambda: np.zeros(3))
    k_env: float = 1e4
    surface_height: float = 0.0
    dob_enabled: bool = True


@dataclass
class ReplayLog:
    """Uniform-Ts log of commanded vs actual motion and the DOB estimate."""

    ts: float
    columns: tuple[str, ...] = (
        "t",
        "x_cmd",
        "y_cmd",
        "f_cmd",
        "x",
        "y",
        "z",
        "f_contact",
        "dob_x",
        "dob_y",
        "dob_z",
    )
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 11)))

    def __len__(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def write_csv(self, path: str | Path, header_comments: list[str] | None = None) -> None:
        buf = io.StringIO()
        for comment in header_comments or []:
            buf.write(f"# {comment}\n")
        buf.write(f"# ts: {self.ts!r}\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _commands_from(traj: MultiStrokeTrajectory, z_cmd: float | None) -> list[Command]:
    commands = []
    if not traj.strokes:
        return commands
    schema = traj.schema
    names = schema.names
    col = {name: names.index(name) for name in ("x", "y", "f_z") if name in names}
    vel = {name: names.index(name) for name in ("v_x", "v_y") if name in names}
    if "x" not in col or "y" not in col:
        raise ValueError("replay needs x and y channels")
    for stroke in traj.strokes:
        for row in stroke.values:
            commands.append(
                Command(
                    x=row[col["x"]],
                    y=row[col["y"]],
                    f_z=row[col["f_z"]] if "f_z" in col else 0.0,
                    v_x=row[vel["v_x"]] if "v_x" in vel else 0.0,
                    v_y=row[vel["v_y"]] if "v_y" in vel else 0.0,
                    z=z_cmd,
                )
            )
    return commands


def run_replay(gains: ControllerGains, traj: MultiStrokeTrajectory, options: ReplayOptions) -> ReplayLog:
    """Replays a 1 ms-grid trajectory through the plant; returns the full log."""
    if traj.strokes and abs(traj.schema.sample_period - gains.ts) > 1e-12:
        raise ValueError(
            f"trajectory period {traj.schema.sample_period} does not match controller Ts {gains.ts}"
        )
    z_cmd = options.surface_height + options.height_offset if not options.force_control else None
    commands = _commands_from(traj, z_cmd)
    log = np.zeros((len(commands), 11))
    if not commands:
        return ReplayLog(gains.ts, rows=log)
    state = PlantState(
        position=np.array([commands[0].x, commands[0].y, options.surface_height + options.height_offset]),
        k_env=options.k_env,
        surface_height=options.surface_height,
    )
    for k, command in enumerate(commands):
        state = control_step(
            gains,
            state,
            command,
            disturbance=options.disturbance,
            force_control=options.force_control,
            dob_enabled=options.dob_enabled,
        )
        log[k] = (
            state.time,
            command.x,
            command.y,
            command.f_z,
            state.position[0],
            state.position[1],
            state.position[2],
            state.contact_force(),
            state.dob_estimate[0],
            state.dob_estimate[1],
            state.dob_estimate[2],
        )
    return ReplayLog(gains.ts, rows=log)
