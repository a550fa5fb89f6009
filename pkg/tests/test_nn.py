"""Unit and oracle tests for the hand-rolled neural engine."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from strokegen import nn


def zero_lstm_params(in_dim=4, hidden=3):
    return {
        "cell.W": np.zeros((in_dim, 4 * hidden)),
        "cell.U": np.zeros((hidden, 4 * hidden)),
        "cell.b": np.zeros(4 * hidden),
    }


class TestLstmStep:
    def test_zero_weights_zero_state_gives_zero_output(self):
        params = zero_lstm_params()
        x = np.array([0.3, -1.2, 5.0, 0.0])
        (h2, c2), _ = nn.lstm_step(params, "cell", x, (np.zeros(3), np.zeros(3)))
        # gates sit at sigmoid(0) = 0.5 and the candidate at tanh(0) = 0
        assert_allclose(h2, np.zeros(3))
        assert_allclose(c2, np.zeros(3))

    def test_deterministic_given_same_inputs(self):
        rng = nn.make_rng(7)
        params = {}
        nn.init_lstm(rng, params, "cell", 4, 5)
        x = np.zeros(4)
        state = (np.zeros(5), np.zeros(5))
        (h_a, c_a), _ = nn.lstm_step(params, "cell", x, state)
        (h_b, c_b), _ = nn.lstm_step(params, "cell", x, state)
        assert np.array_equal(h_a, h_b)
        assert np.array_equal(c_a, c_b)

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_output_is_tanh_bounded(self, seed):
        rng = nn.make_rng(seed)
        params = {}
        nn.init_lstm(rng, params, "cell", 3, 4)
        x = rng.normal(scale=3.0, size=3)
        state = (rng.normal(size=4), rng.normal(scale=5.0, size=4))
        (h2, _), _ = nn.lstm_step(params, "cell", x, state)
        assert np.all(np.abs(h2) <= 1.0)

    def test_gradients_match_finite_differences(self):
        rng = nn.make_rng(3)
        params = {}
        nn.init_lstm(rng, params, "cell", 4, 6)
        xs = rng.normal(size=(5, 4))
        target = rng.normal(size=6)

        def loss_fn(p):
            grads = nn.zero_grads(p)
            h = np.zeros(6)
            c = np.zeros(6)
            caches = []
            for t in range(xs.shape[0]):
                (h, c), cache = nn.lstm_step(p, "cell", xs[t], (h, c))
                caches.append(cache)
            diff = h - target
            loss = float(np.sum(diff * diff))
            dh = 2.0 * diff
            dc = np.zeros(6)
            for cache in reversed(caches):
                _, dh, dc = nn.lstm_step_backward(p, grads, "cell", cache, dh, dc)
            return loss, grads

        assert nn.grad_check(params, loss_fn, n_coords=200, step=1e-5) < 1e-4


class TestKlDivergence:
    def test_standard_normal_gives_zero(self):
        assert nn.kl_divergence(np.zeros(4), np.zeros(4)) == pytest.approx(0.0, abs=1e-12)

    def test_unit_mean_gives_half(self):
        assert nn.kl_divergence(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5, abs=1e-12)

    def test_matches_independent_scalar_evaluation(self):
        # independent per-coordinate evaluation of the closed form
        mu = [0.5, -0.5, 0.0]
        var = [0.25, 1.0, 4.0]
        expected = -0.5 * sum(1.0 + math.log(v) - m * m - v for m, v in zip(mu, var))
        assert expected == pytest.approx(1.375, abs=1e-12)
        got = nn.kl_divergence(np.array(mu), np.log(np.array(var)))
        assert got == pytest.approx(expected, abs=1e-12)

    @given(
        mu=st.lists(st.floats(-5, 5), min_size=1, max_size=6),
        log_var=st.lists(st.floats(-6, 4), min_size=1, max_size=6),
    )
    @settings(max_examples=100, deadline=None)
    def test_nonnegative(self, mu, log_var):
        n = min(len(mu), len(log_var))
        value = nn.kl_divergence(np.array(mu[:n]), np.array(log_var[:n]))
        assert value >= -1e-12

    def test_gradients(self):
        mu = np.array([[0.4, -0.2, 1.1]])
        log_var = np.array([[0.3, -0.5, 0.0]])
        dmu, dlv = nn.kl_backward(mu, log_var, np.ones(1))
        assert_allclose(dmu, mu)
        assert_allclose(dlv, 0.5 * (np.exp(log_var) - 1.0))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            nn.kl_divergence(np.array([np.nan]), np.array([0.0]))


class TestReparameterize:
    def test_zero_noise_returns_mu(self):
        mu = np.array([0.1, -0.7])
        z, eps = nn.reparameterize(mu, np.array([0.3, -0.3]), rng=None)
        assert_allclose(z, mu)
        assert_allclose(eps, 0.0)

    def test_log_var_is_clamped(self):
        z, _ = nn.reparameterize(np.zeros(1), np.array([1e6]), rng=None)
        assert np.isfinite(z).all()
        # clamped at +10: sigma = exp(5)
        rng = nn.make_rng(0)
        z, eps = nn.reparameterize(np.zeros(1), np.array([1e6]), rng=rng)
        assert_allclose(z, np.exp(5.0) * eps)

    def test_sample_statistics(self):
        rng = nn.make_rng(11)
        z, _ = nn.reparameterize(np.zeros(100_000), np.zeros(100_000), rng=rng)
        assert abs(float(z.mean())) < 0.02
        assert abs(float(z.var()) - 1.0) < 0.05


class TestAdam:
    def test_first_step_magnitude(self):
        params = {"w": np.array([0.0])}
        state = nn.adam_init(params, lr=1e-3)
        nn.adam_step(state, params, {"w": np.array([0.37])})
        assert abs(abs(float(params["w"][0])) - 1e-3) < 1e-9
        assert float(params["w"][0]) < 0  # moves against the gradient

    def test_zero_gradient_leaves_params_unchanged(self):
        params = {"w": np.array([1.5, -2.0])}
        state = nn.adam_init(params)
        nn.adam_step(state, params, {"w": np.zeros(2)})
        assert_allclose(params["w"], [1.5, -2.0])

    def test_converges_on_quadratic_bowl(self):
        params = {"theta": np.array([1.0])}
        state = nn.adam_init(params, lr=0.01)
        for _ in range(500):
            nn.adam_step(state, params, {"theta": 2.0 * params["theta"]})
        assert abs(float(params["theta"][0])) < 0.05

    def test_shape_mismatch_raises(self):
        params = {"w": np.zeros(3)}
        state = nn.adam_init(params)
        with pytest.raises(ValueError):
            nn.adam_step(state, params, {"w": np.zeros(4)})


class TestGradCheck:
    def _linear_setup(self):
        rng = nn.make_rng(5)
        x = rng.normal(size=(8, 3))
        t = rng.normal(size=8)
        params = {"w": rng.normal(size=3), "b": np.array([0.1])}

        def loss_fn(p):
            y = x @ p["w"] + p["b"][0]
            diff = y - t
            return float(np.sum(diff * diff)), {
                "w": 2.0 * x.T @ diff,
                "b": np.array([2.0 * np.sum(diff)]),
            }

        return params, loss_fn

    def test_exact_gradient_passes_tightly(self):
        params, loss_fn = self._linear_setup()
        assert nn.grad_check(params, loss_fn) < 1e-7

    def test_corrupted_gradient_is_detected(self):
        params, loss_fn = self._linear_setup()

        def corrupted(p):
            loss, grads = loss_fn(p)
            grads["w"] = grads["w"].copy()
            grads["w"][0] *= 2.0  # deliberate fault on one weight
            return loss, grads

        assert nn.grad_check(params, corrupted) > 0.5

    def test_clip_global_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        norm = nn.clip_global_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert nn.global_norm(grads) == pytest.approx(1.0)
