"""Model-level tests: loss formulas, masking, gradients, decode contracts."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from strokegen import nn
from strokegen.core import NormalizationStats, StrokeEndpoints, Trajectory, default_schema
from strokegen.cvae_traj import (
    TrajBatch,
    TrajConfig,
    decode_traj,
    derivative_sequence,
    init_traj_model,
    make_traj_batch,
    traj_loss,
    train_traj,
)
from strokegen.vae_point import (
    PointConfig,
    decode_points,
    encode_points,
    init_point_model,
    make_point_batch,
    point_loss,
    train_point,
)

SCHEMA = default_schema(sample_period=0.01)


def toy_point_model(hidden=8, m_max=4, seed=0):
    config = PointConfig(hidden=hidden, m_max=m_max)
    return init_point_model(SCHEMA, config, nn.make_rng(seed))


def toy_traj_model(hidden=8, n=5, seed=0):
    config = TrajConfig(hidden=hidden, n_samples=n)
    return init_traj_model(SCHEMA, config, nn.make_rng(seed))


def zeroed(model):
    for name in model.params:
        model.params[name] = np.zeros_like(model.params[name])
    return model


class TestPointLoss:
    def test_perfect_reconstruction_and_standard_posterior_gives_zero(self):
        model = zeroed(toy_point_model())
        batch = make_point_batch([np.zeros((3, 6))])
        loss, _ = point_loss(model, batch, nn.make_rng(0))
        assert loss == pytest.approx(0.0, abs=1e-15)

    def test_single_error_of_half_gives_quarter(self):
        # one stroke, one pair entry off by 0.5, KL zero
        model = zeroed(toy_point_model())
        pairs = np.zeros((1, 6))
        pairs[0, 0] = 0.5
        loss, _ = point_loss(model, make_point_batch([pairs]), None)
        assert loss == pytest.approx(0.25, abs=1e-15)

    def test_masking_leaves_loss_and_gradients_unchanged(self):
        model = toy_point_model(seed=3)
        rng = nn.make_rng(5)
        seqs = [rng.normal(size=(3, 6)), rng.normal(size=(2, 6))]
        tight = make_point_batch(seqs)
        padded = make_point_batch(seqs, pad_to=model.config.m_max)
        loss_a, grads_a = point_loss(model, tight, nn.make_rng(9))
        loss_b, grads_b = point_loss(model, padded, nn.make_rng(9))
        assert abs(loss_a - loss_b) < 1e-12
        for name in grads_a:
            assert np.max(np.abs(grads_a[name] - grads_b[name])) < 1e-12

    def test_gradients_match_finite_differences(self):
        model = toy_point_model(seed=1)
        rng = nn.make_rng(2)
        seqs = [rng.normal(scale=0.5, size=(3, 6)) for _ in range(2)]
        batch = make_point_batch(seqs)

        def loss_fn(p):
            model.params = p
            return point_loss(model, batch, nn.make_rng(77))

        assert nn.grad_check(model.params, loss_fn, n_coords=200) < 1e-4


class TestPointCodec:
    def test_decode_is_deterministic_and_sized(self):
        model = toy_point_model(seed=4)
        z = np.full(6, 0.2)
        out1 = decode_points(model, z, 3)
        out2 = decode_points(model, z, 3)
        assert len(out1) == 3
        assert [ep.stroke_index for ep in out1] == [1, 2, 3]
        for a, b in zip(out1, out2):
            assert np.array_equal(a.pair_vector(), b.pair_vector())
        assert len(decode_points(model, z, 1)) == 1

    def test_decode_rejects_bad_latent(self):
        model = toy_point_model()
        with pytest.raises(ValueError):
            decode_points(model, np.zeros(5), 2)

    def test_encode_rejects_overlong_sequences(self):
        model = toy_point_model(m_max=2)
        seq = [StrokeEndpoints(np.zeros(3), np.ones(3), m + 1) for m in range(3)]
        with pytest.raises(ValueError):
            encode_points(model, seq)

    def test_encode_deterministic(self):
        model = toy_point_model(seed=6)
        seq = [StrokeEndpoints(np.zeros(3), np.ones(3), 1)]
        mu1, lv1 = encode_points(model, seq)
        mu2, lv2 = encode_points(model, seq)
        assert np.array_equal(mu1, mu2)
        assert np.array_equal(lv1, lv2)

    def test_train_zero_epochs_returns_model_unchanged(self):
        model = toy_point_model(seed=8)
        before = {k: v.copy() for k, v in model.params.items()}
        _, history = train_point(model, [np.zeros((2, 6))], 0, 4, nn.make_rng(0))
        assert history == []
        for name in before:
            assert np.array_equal(before[name], model.params[name])


class TestDerivativeSequence:
    def test_constant_trajectory_has_zero_derivative(self):
        traj = Trajectory(SCHEMA, np.ones((5, 3)))
        assert_allclose(derivative_sequence(traj), np.zeros((4, 3)))

    def test_linear_ramp_gives_constant_slope(self):
        t = np.arange(6)[:, None] * SCHEMA.sample_period
        traj = Trajectory(SCHEMA, np.repeat(2.0 * t, 3, axis=1))
        assert_allclose(derivative_sequence(traj), np.full((5, 3), 2.0), atol=1e-12)

    def test_shift_invariance(self):
        rng = nn.make_rng(12)
        values = rng.normal(size=(7, 3))
        base = derivative_sequence(Trajectory(SCHEMA, values))
        shifted = derivative_sequence(Trajectory(SCHEMA, values + 3.7))
        assert_allclose(base, shifted, atol=1e-9)

    def test_too_short_raises(self):
        values = np.zeros((2, 3))
        traj = Trajectory(SCHEMA, values)
        assert derivative_sequence(traj).shape == (1, 3)
        with pytest.raises(Exception):
            Trajectory(SCHEMA, np.zeros((1, 3)))


class TestTrajLoss:
    def test_perfect_reconstruction_gives_zero(self):
        model = zeroed(toy_traj_model())
        xs = np.zeros((2, 5, 3))
        batch = make_traj_batch(model, xs, SCHEMA.sample_period)
        loss, _ = traj_loss(model, batch, nn.make_rng(0))
        assert loss == pytest.approx(0.0, abs=1e-15)

    def test_constant_offset_error_hits_only_first_term(self):
        model = zeroed(toy_traj_model())
        e = 0.3
        xs = np.zeros((1, 5, 3))
        xs[0, :, 1] = e  # constant error on one channel; derivative term stays zero
        batch = TrajBatch(xs, np.zeros((1, 3)), SCHEMA.sample_period)
        loss, _ = traj_loss(model, batch, None)
        assert loss == pytest.approx(e * e, abs=1e-15)

    def test_gradients_match_finite_differences(self):
        model = toy_traj_model(seed=21)
        rng = nn.make_rng(22)
        xs = rng.normal(scale=0.5, size=(2, 5, 3))
        # unit period: the 1/period^2 loss amplification otherwise drowns the
        # finite differences in float64 roundoff at the spec'd 1e-5 step
        batch = make_traj_batch(model, xs, 1.0)

        def loss_fn(p):
            model.params = p
            return traj_loss(model, batch, nn.make_rng(55))

        assert nn.grad_check(model.params, loss_fn, n_coords=200) < 1e-4


class TestTrajDecode:
    def test_first_position_sample_clamped_to_zero(self):
        model = toy_traj_model(seed=30)
        model.stats = NormalizationStats(np.array([0.1, -0.2, 0.5]), np.array([2.0, 2.0, 1.0]))
        out = decode_traj(model, np.zeros(3), np.array([0.05, 0.0, 0.4]))
        assert out.values[0, 0] == 0.0
        assert out.values[0, 1] == 0.0
        assert len(out) == model.config.n_samples
        assert "endpoint_error" in out.meta

    def test_decode_deterministic(self):
        model = toy_traj_model(seed=31)
        endpoint = np.array([0.1, 0.02, 0.5])
        a = decode_traj(model, np.full(3, 0.3), endpoint)
        b = decode_traj(model, np.full(3, 0.3), endpoint)
        assert np.array_equal(a.values, b.values)

    def test_decode_rejects_bad_shapes(self):
        model = toy_traj_model()
        with pytest.raises(ValueError):
            decode_traj(model, np.zeros(2), np.zeros(3))
        with pytest.raises(Exception):
            decode_traj(model, np.zeros(3), np.zeros(4))

    def test_train_zero_epochs_is_identity(self):
        model = toy_traj_model(seed=33)
        before = {k: v.copy() for k, v in model.params.items()}
        _, history = train_traj(model, [np.zeros((5, 3))], 0, 10, nn.make_rng(0))
        assert history == []
        for name in before:
            assert np.array_equal(before[name], model.params[name])
