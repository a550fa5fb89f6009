"""Segmentation, endpoint extraction, downsampling, offsetting, augmentation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from strokegen.core import StrokeEndpoints, Trajectory, default_schema
from strokegen.fixtures import SyntheticStrokeSpec, make_character, make_stroke
from strokegen.ingestion import (
    SegmentationConfig,
    SegmentationError,
    add_start_back,
    augment,
    downsample,
    extract_endpoints,
    offset_to_origin,
    rotation_angles,
    segment_strokes,
)

SCHEMA = default_schema()


def recording_from_force(force):
    values = np.zeros((len(force), 3))
    values[:, 0] = np.arange(len(force))  # x walks so strokes are non-degenerate
    values[:, 2] = force
    return Trajectory(SCHEMA, values)


class TestSegmentation:
    def test_threshold_runs(self):
        rec = recording_from_force([0.0, 0.3, 0.3, 0.1, 0.4, 0.4, 0.0])
        cfg = SegmentationConfig(min_stroke_samples=2)
        strokes = segment_strokes(rec, cfg)
        assert [len(s) for s in strokes] == [2, 2]
        assert_allclose(strokes[0].values[:, 2], [0.3, 0.3])
        assert_allclose(strokes[1].values[:, 2], [0.4, 0.4])

    def test_letter_a_gives_three_strokes(self):
        _, rec = make_character("A", scale=0.1)
        strokes = segment_strokes(rec, SegmentationConfig())
        assert len(strokes) == 3

    def test_all_zero_force_is_an_error(self):
        rec = recording_from_force(np.zeros(10))
        with pytest.raises(SegmentationError, match="no stroke found"):
            segment_strokes(rec, SegmentationConfig())

    def test_short_blips_are_dropped(self):
        rec = recording_from_force([0.0, 0.9, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0])
        strokes = segment_strokes(rec, SegmentationConfig(min_stroke_samples=3))
        assert len(strokes) == 1
        assert len(strokes[0]) == 5

    def test_every_retained_sample_meets_threshold(self):
        rng = np.random.default_rng(5)
        force = np.abs(rng.normal(scale=0.4, size=60))
        rec = recording_from_force(force)
        cfg = SegmentationConfig(min_stroke_samples=2)
        try:
            strokes = segment_strokes(rec, cfg)
        except SegmentationError:
            return
        for s in strokes:
            assert np.all(s.values[:, 2] >= cfg.force_threshold)

    def test_missing_force_channel(self):
        rec = recording_from_force(np.ones(8))
        with pytest.raises(Exception):
            segment_strokes(rec, SegmentationConfig(force_channel="nope"))


class TestEndpoints:
    def test_single_stroke(self):
        values = np.array([[0.0, 0.0, 1.0], [1.0, 1.0, 1.0], [2.0, 2.0, 1.0]])
        eps = extract_endpoints([Trajectory(SCHEMA, values)])
        assert len(eps) == 1
        assert_allclose(eps[0].start, [0.0, 0.0, 1.0])
        assert_allclose(eps[0].end, [2.0, 2.0, 1.0])
        assert eps[0].stroke_index == 1

    def test_order_preserved_for_identical_strokes(self):
        stroke = Trajectory(SCHEMA, np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]]))
        eps = extract_endpoints([stroke, stroke.copy()])
        assert [e.stroke_index for e in eps] == [1, 2]
        assert np.array_equal(eps[0].pair_vector(), eps[1].pair_vector())

    def test_letter_a_has_three_pairs(self):
        endpoints, rec = make_character("A", scale=0.1)
        strokes = segment_strokes(rec, SegmentationConfig())
        extracted = extract_endpoints(strokes)
        assert len(extracted) == 3
        for want, got in zip(endpoints, extracted):
            assert_allclose(want.start[:2], got.start[:2], atol=1e-12)
            assert_allclose(want.end[:2], got.end[:2], atol=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            extract_endpoints([])


class TestDownsample:
    def test_endpoints_bit_exact(self):
        rng = np.random.default_rng(9)
        traj = Trajectory(SCHEMA, rng.normal(size=(800, 3)))
        down = downsample(traj, 100)
        assert len(down) == 100
        assert np.array_equal(down.values[0], traj.values[0])
        assert np.array_equal(down.values[-1], traj.values[-1])
        assert down.schema.sample_period == pytest.approx(SCHEMA.sample_period * 799 / 99)

    def test_identity_when_lengths_match(self):
        traj = Trajectory(SCHEMA, np.arange(30.0).reshape(10, 3))
        down = downsample(traj, 10)
        assert np.array_equal(down.values, traj.values)
        assert down.schema.sample_period == SCHEMA.sample_period

    def test_ramp_stays_on_ramp(self):
        n = 57
        ramp = np.linspace(0.0, 1.0, n)
        traj = Trajectory(SCHEMA, np.column_stack([ramp, 2 * ramp, np.ones(n)]))
        down = downsample(traj, 13)
        # uniform index selection keeps x-y collinear: y = 2x exactly
        assert np.max(np.abs(down.values[:, 1] - 2 * down.values[:, 0])) < 1e-12

    def test_upsampling_rejected(self):
        traj = Trajectory(SCHEMA, np.zeros((5, 3)))
        with pytest.raises(ValueError):
            downsample(traj, 6)


class TestOffset:
    def test_positions_shift_forces_stay(self):
        values = np.array([[2.0, 3.0, 0.7], [4.0, 5.0, 0.9]])
        offset, start = offset_to_origin(Trajectory(SCHEMA, values))
        assert_allclose(offset.values[:, :2], [[0.0, 0.0], [2.0, 2.0]])
        assert_allclose(offset.values[:, 2], [0.7, 0.9])
        assert_allclose(start, [2.0, 3.0, 0.7])

    def test_already_at_origin_unchanged(self):
        values = np.array([[0.0, 0.0, 0.5], [1.0, 2.0, 0.5]])
        offset, _ = offset_to_origin(Trajectory(SCHEMA, values))
        assert np.array_equal(offset.values, values)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        traj = Trajectory(SCHEMA, rng.normal(scale=4.0, size=(6, 3)))
        offset, start = offset_to_origin(traj)
        back = add_start_back(offset, start)
        assert np.max(np.abs(back.values - traj.values)) < 1e-12


class TestAugment:
    def test_paper_count_and_identity(self):
        rng = np.random.default_rng(2)
        dataset = [Trajectory(SCHEMA, rng.normal(size=(20, 3))) for _ in range(10)]
        angles = rotation_angles(20.0)
        assert len(angles) == 18
        out = augment(dataset, angles)
        assert len(out) == 180
        # rotation-0 copies are bit-identical to their inputs
        for i, traj in enumerate(dataset):
            assert np.array_equal(out[i * 18].values, traj.values)

    def test_quarter_turn(self):
        values = np.array([[1.0, 0.0, 0.5], [2.0, 0.0, 0.5]])
        out = augment([Trajectory(SCHEMA, values)], [90.0])
        assert_allclose(out[0].values[0, :2], [0.0, 1.0], atol=1e-12)
        assert_allclose(out[0].values[1, :2], [0.0, 2.0], atol=1e-12)
        assert_allclose(out[0].values[:, 2], [0.5, 0.5])

    @given(seed=st.integers(0, 2**31 - 1), angle=st.floats(0.0, 360.0))
    @settings(max_examples=30, deadline=None)
    def test_norms_preserved(self, seed, angle):
        rng = np.random.default_rng(seed)
        traj = Trajectory(SCHEMA, rng.normal(size=(8, 3)))
        out = augment([traj], [angle])[0]
        before = np.linalg.norm(traj.values[:, :2], axis=1)
        after = np.linalg.norm(out.values[:, :2], axis=1)
        assert np.max(np.abs(before - after)) < 1e-9

    def test_translations_multiply_count(self):
        traj = Trajectory(SCHEMA, np.zeros((3, 3)) + [[0, 0, 1], [1, 0, 1], [2, 0, 1]])
        out = augment([traj], [0.0, 180.0], [(0.0, 0.0), (0.5, -0.5)])
        assert len(out) == 4
        assert_allclose(out[1].values[1, :2], [1.5, -0.5])

    def test_empty_angles_rejected(self):
        with pytest.raises(ValueError):
            augment([Trajectory(SCHEMA, np.zeros((2, 3)))], [])

    def test_velocity_channels_rotate(self):
        from strokegen.core import make_schema

        schema = make_schema(
            [("x", "m", "position"), ("y", "m", "position"), ("v_x", "m/s", "velocity"), ("v_y", "m/s", "velocity")],
            0.01,
        )
        values = np.array([[1.0, 0.0, 3.0, 0.0], [2.0, 0.0, 3.0, 0.0]])
        out = augment([Trajectory(schema, values)], [90.0])[0]
        assert_allclose(out.values[0], [0.0, 1.0, 0.0, 3.0], atol=1e-12)
