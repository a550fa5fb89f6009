"""Impedance-control plant, DOB, and replay-loop tests."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from strokegen.composer import MultiStrokeTrajectory
from strokegen.core import Trajectory, default_schema
from strokegen.replay import (
    Command,
    ControllerGains,
    PlantState,
    ReplayOptions,
    control_step,
    dob_step,
    run_replay,
)


def hold_trajectory(n, x=0.0, y=0.0, f=2.0, ts=0.001):
    values = np.zeros((n, 3))
    values[:, 0] = x
    values[:, 1] = y
    values[:, 2] = f
    return MultiStrokeTrajectory([Trajectory(default_schema(ts), values)])


class TestControlStep:
    def test_zero_gains_plant_coasts(self):
        gains = ControllerGains(kp=np.zeros(3), kd=np.zeros(3), kf_z=0.0)
        state = PlantState(position=np.array([0.0, 0.0, 1.0]), velocity=np.array([0.1, -0.2, 0.0]))
        for _ in range(100):
            state = control_step(gains, state, Command(), dob_enabled=False)
        assert_allclose(state.velocity, [0.1, -0.2, 0.0], atol=1e-12)
        assert state.position[0] == pytest.approx(0.1 * 0.1, rel=1e-6)

    def test_step_response_settles_within_half_second(self):
        gains = ControllerGains()  # x axis: Kp 500, Kd 35
        state = PlantState(position=np.array([0.0, 0.0, 1.0]))
        cmd = Command(x=0.01)
        for _ in range(500):
            state = control_step(gains, state, cmd)
        assert abs(state.position[0] - 0.01) < 0.02 * 0.01

    def test_force_tracking_steady_state(self):
        gains = ControllerGains()
        state = PlantState(position=np.zeros(3), k_env=1e4, surface_height=0.0)
        cmd = Command(f_z=2.0)
        for _ in range(3000):
            state = control_step(gains, state, cmd)
        assert state.contact_force() == pytest.approx(2.0, rel=0.02)

    def test_non_finite_state_aborts(self):
        gains = ControllerGains()
        state = PlantState(position=np.array([np.nan, 0.0, 0.0]))
        with pytest.raises(FloatingPointError):
            control_step(gains, state, Command())

    def test_energy_decreases_under_pure_damping(self):
        gains = ControllerGains(kp=np.zeros(3), kd=np.array([5.0, 5.0, 5.0]), kf_z=0.0)
        state = PlantState(position=np.array([0.0, 0.0, 1.0]), velocity=np.array([0.3, -0.2, 0.1]))
        energy = 0.5 * float(np.sum(gains.inertia * state.velocity**2))
        for _ in range(400):
            state = control_step(gains, state, Command(), dob_enabled=False)
            new_energy = 0.5 * float(np.sum(gains.inertia * state.velocity**2))
            assert new_energy <= energy + 1e-15
            energy = new_energy

    def test_contact_force_never_negative(self):
        rng = np.random.default_rng(4)
        gains = ControllerGains()
        state = PlantState(position=np.array([0.0, 0.0, 0.002]))
        for _ in range(300):
            cmd = Command(x=rng.normal(0, 0.01), y=rng.normal(0, 0.01), f_z=rng.uniform(0, 3))
            state = control_step(gains, state, cmd)
            assert state.contact_force() >= 0.0


class TestDob:
    def test_zero_disturbance_estimate_stays_zero(self):
        inertia = np.array([1.6, 0.72, 0.32])
        lowpass = np.zeros(3)
        for _ in range(200):
            lowpass, est = dob_step(lowpass, inertia, np.zeros(3), np.zeros(3), np.zeros(3), 10.0, 0.001)
        assert_allclose(est, np.zeros(3), atol=1e-12)

    def test_constant_disturbance_converges_within_filter_time(self):
        # open-loop plant I*dv = u + d with u = 0 and constant d
        inertia = np.array([1.0, 1.0, 1.0])
        d = np.array([5.0, 0.0, -2.0])
        ts, cutoff = 0.001, 10.0
        v = np.zeros(3)
        lowpass = np.zeros(3)
        est = np.zeros(3)
        steps = int(5.0 / (2 * np.pi * cutoff) / ts) + 1
        history = []
        for _ in range(steps):
            v_prev = v
            v = v + ts * d / inertia
            lowpass, est = dob_step(lowpass, inertia, np.zeros(3), v, v_prev, cutoff, ts)
            history.append(est.copy())
        assert abs(est[0] - 5.0) < 0.02 * 5.0
        assert abs(est[2] + 2.0) < 0.02 * 2.0
        # monotone approach after the first few filter samples
        errs = [abs(h[0] - 5.0) for h in history[5:]]
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))

    def test_rejects_bad_cutoff(self):
        with pytest.raises(ValueError):
            dob_step(np.zeros(3), np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3), 0.0, 0.001)


class TestRunReplay:
    def test_zero_length_trajectory_gives_empty_log(self):
        gains = ControllerGains()
        log = run_replay(gains, MultiStrokeTrajectory([]), ReplayOptions())
        assert len(log) == 0

    def test_position_only_minus_1mm_hits_spring_law(self):
        # softer spring than the 1e4 default: the z loop converges on the slow
        # DOB-interaction mode tau ~ K_env/(I*Kp*omega), so a desk-scale spring
        # keeps the steady state within a 10 s run
        gains = ControllerGains()
        traj = hold_trajectory(10_000)
        options = ReplayOptions(force_control=False, height_offset=-0.001, k_env=2000.0)
        log = run_replay(gains, traj, options)
        steady = log.column("f_contact")[-200:]
        # the "excessive force" failure mode: K_env * 1 mm, vs the 2 N command
        assert np.mean(steady) == pytest.approx(2000.0 * 0.001, rel=0.02)

    def test_force_control_tracks_despite_height_offsets(self):
        gains = ControllerGains()
        traj = hold_trajectory(3000)
        for offset in (-0.001, 0.0, 0.001, 0.002):
            log = run_replay(gains, traj, ReplayOptions(force_control=True, height_offset=offset))
            steady = log.column("f_contact")[-200:]
            assert np.mean(steady) == pytest.approx(2.0, rel=0.05), f"offset {offset}"

    def test_dob_cuts_steady_position_error(self):
        gains = ControllerGains()
        traj = hold_trajectory(2500, x=0.01, f=1.0)
        disturbance = np.array([5.0, 0.0, 0.0])
        errors = {}
        for dob in (True, False):
            log = run_replay(gains, traj, ReplayOptions(disturbance=disturbance, dob_enabled=dob))
            errors[dob] = abs(np.mean(log.column("x")[-200:]) - 0.01)
        assert errors[True] * 5.0 <= errors[False]

    def test_replay_is_deterministic(self):
        gains = ControllerGains()
        traj = hold_trajectory(500, x=0.02)
        a = run_replay(gains, traj, ReplayOptions())
        b = run_replay(gains, traj, ReplayOptions())
        assert np.array_equal(a.rows, b.rows)

    def test_period_mismatch_rejected(self):
        gains = ControllerGains()
        traj = hold_trajectory(100, ts=0.008)
        with pytest.raises(ValueError):
            run_replay(gains, traj, ReplayOptions())

    def test_log_csv(self, tmp_path):
        gains = ControllerGains()
        log = run_replay(gains, hold_trajectory(50), ReplayOptions())
        log.write_csv(tmp_path / "log.csv", header_comments=["config: seed=0"])
        text = (tmp_path / "log.csv").read_text()
        assert text.splitlines()[2].startswith("t,x_cmd")
        assert len(text.splitlines()) == 53
