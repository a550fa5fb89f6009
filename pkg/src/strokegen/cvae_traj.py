"""Lower model: a conditional recurrent VAE over origin-offset stroke trajectories.

The condition vector is the offset trajectory's final sample (the stroke
endpoint relative to its start), concatenated to every encoder step input and,
together with the 3-D latent, to every decoder step input. Both encoder and
decoder are stacked LSTMs; the loss adds a finite-difference derivative term
to the reconstruction MSE.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .core import ChannelSchema, NormalizationStats, SchemaError, Trajectory, fit_stats_array


@dataclass
class TrajConfig:
    latent_dim: int = 3
    hidden: int = 256
    layers: int = 2
    n_samples: int = 100
    condition_force: bool = True  # include force channels in the condition vector
    learning_rate: float = 1e-3
    grad_clip: float = 5.0


@dataclass
class TrajModel:
    schema: ChannelSchema
    stats: NormalizationStats  # over the C trajectory channels
    config: TrajConfig
    params: nn.Params = field(default_factory=dict)

    @property
    def condition_indices(self) -> tuple[int, ...]:
        if self.config.condition_force:
            return tuple(range(self.schema.channel_count))
        force = set(self.schema.force_indices)
        return tuple(i for i in range(self.schema.channel_count) if i not in force)

    @property
    def condition_dim(self) -> int:
        return len(self.condition_indices)


def init_traj_model(schema: ChannelSchema, config: TrajConfig, rng: np.random.Generator) -> TrajModel:
    c = schema.channel_count
    stats = NormalizationStats(np.zeros(c), np.ones(c))
    model = TrajModel(schema, stats, config)
    p = model.params
    h = config.hidden
    cond = model.condition_dim
    enc_in = c + cond
    dec_in = config.latent_dim + cond
    for layer in range(config.layers):
        nn.init_lstm(rng, p, f"enc_lstm{layer}", enc_in if layer == 0 else h, h)
    nn.init_gaussian_head(rng, p, "enc_head", h, config.latent_dim)
    for layer in range(config.layers):
        nn.init_lstm(rng, p, f"dec_lstm{layer}", dec_in if layer == 0 else h, h)
    nn.init_dense(rng, p, "dec_hidden", h, h)
    nn.init_dense(rng, p, "dec_out", h, c)
    return model


def derivative_sequence(traj: Trajectory) -> np.ndarray:
    """Forward differences divided by the sample period; shape (N-1, channels)."""
    if len(traj) < 2:
        raise ValueError("derivative needs at least 2 samples")
    return np.diff(traj.values, axis=0) / traj.schema.sample_period


def _diff(values: np.ndarray, period: float) -> np.ndarray:
    return np.diff(values, axis=-2) / period


@dataclass
class TrajBatch:
    """Normalized offset trajectories (all length N) plus their condition vectors."""

    xs: np.ndarray  # (B, N, C)
    cond: np.ndarray  # (B, K)
    sample_period: float

    def __post_init__(self):
        if self.xs.ndim != 3 or self.cond.ndim != 2 or self.xs.shape[0] != self.cond.shape[0]:
            raise ValueError("inconsistent batch shapes")


def make_traj_batch(model: TrajModel, xs: np.ndarray, sample_period: float) -> TrajBatch:
    cond = xs[:, -1, :][:, list(model.condition_indices)]
    return TrajBatch(xs, cond, sample_period)


# ---------------------------------------------------------------------------
# Stacked-LSTM forward/backward helpers

def _stack_forward(model: TrajModel, prefix: str, step_inputs: np.ndarray):
    """Runs the LSTM stack over (B, N, D) inputs; returns top-layer hs and caches."""
    caches = []
    x = step_inputs
    for layer in range(model.config.layers):
        x, cache = nn.lstm_seq_forward(model.params, f"{prefix}{layer}", x)
        caches.append(cache)
    return x, caches


def _stack_backward(model: TrajModel, grads: nn.Params, prefix: str, caches, d_top: np.ndarray):
    """Backward through the stack; d_top is (B, N, H) on the top layer outputs.

    Returns the gradient w.r.t. the (B, N, D) step inputs.
    """
    d = d_top
    for layer in reversed(range(model.config.layers)):
        d, _, _ = nn.lstm_seq_backward(model.params, grads, f"{prefix}{layer}", caches[layer], d)
    return d


def _decode_forward(model: TrajModel, z: np.ndarray, cond: np.ndarray, steps: int):
    p = model.params
    batch = z.shape[0]
    dec_in = np.concatenate([z, cond], axis=1)
    step_inputs = np.repeat(dec_in[:, None, :], steps, axis=1)
    top, stack_caches = _stack_forward(model, "dec_lstm", step_inputs)
    flat = top.reshape(batch * steps, -1)
    hid, hid_cache = nn.dense_forward(p, "dec_hidden", flat, "tanh")
    out, out_cache = nn.dense_forward(p, "dec_out", hid)
    outs = out.reshape(batch, steps, -1)
    return outs, (stack_caches, hid_cache, out_cache)


def _decode_backward(model: TrajModel, grads: nn.Params, cache, d_outs: np.ndarray):
    p = model.params
    stack_caches, hid_cache, out_cache = cache
    batch, steps, c = d_outs.shape
    dhid = nn.dense_backward(p, grads, "dec_out", out_cache, d_outs.reshape(batch * steps, c))
    d_top = nn.dense_backward(p, grads, "dec_hidden", hid_cache, dhid).reshape(batch, steps, -1)
    d_inputs = _stack_backward(model, grads, "dec_lstm", stack_caches, d_top)
    d_dec_in = d_inputs.sum(axis=1)  # z and cond are repeated at every step
    j = model.config.latent_dim
    return d_dec_in[:, :j], d_dec_in[:, j:]


# ---------------------------------------------------------------------------
# Public operations

def traj_loss(model: TrajModel, batch: TrajBatch, rng: np.random.Generator | None):
    """MSE + derivative MSE + KL over a batch of offset trajectories."""
    p = model.params
    grads = nn.zero_grads(p)
    xs, cond, period = batch.xs, batch.cond, batch.sample_period
    batch_size, steps, _ = xs.shape

    enc_inputs = np.concatenate([xs, np.repeat(cond[:, None, :], steps, axis=1)], axis=2)
    top, enc_caches = _stack_forward(model, "enc_lstm", enc_inputs)
    h_final = top[:, -1, :]
    mu, log_var, head_cache = nn.gaussian_head_forward(p, "enc_head", h_final)
    z, eps = nn.reparameterize(mu, log_var, rng)
    outs, dec_cache = _decode_forward(model, z, cond, steps)

    diff = outs - xs
    recon = np.sum(diff * diff, axis=(1, 2)) / steps
    d_pred = _diff(outs, period)
    d_true = _diff(xs, period)
    ddiff = d_pred - d_true
    deriv = np.sum(ddiff * ddiff, axis=(1, 2)) / (steps - 1)
    kl = nn.kl_terms(mu, log_var)
    loss = float(np.mean(recon + deriv + kl))
    if not np.isfinite(loss):
        return loss, grads

    d_outs = (2.0 / (batch_size * steps)) * diff
    d_dd = (2.0 / (batch_size * (steps - 1))) * ddiff / period
    d_outs[:, 1:, :] += d_dd
    d_outs[:, :-1, :] -= d_dd

    dz, dcond_dec = _decode_backward(model, grads, dec_cache, d_outs)
    dmu, dlog_var = nn.reparameterize_backward(log_var, eps, dz)
    dmu_kl, dlv_kl = nn.kl_backward(mu, log_var, np.full(batch_size, 1.0 / batch_size))
    dmu += dmu_kl
    dlog_var += dlv_kl

    d_h_final = nn.gaussian_head_backward(p, grads, "enc_head", head_cache, dmu, dlog_var)
    d_top = np.zeros_like(top)
    d_top[:, -1, :] = d_h_final
    _stack_backward(model, grads, "enc_lstm", enc_caches, d_top)
    # gradients w.r.t. xs and cond are not needed: inputs are data
    del dcond_dec
    return loss, grads


def train_traj(
    model: TrajModel,
    dataset: list[np.ndarray],
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
    sample_period: float | None = None,
) -> tuple[TrajModel, list[float]]:
    """Minibatch Adam training over normalized offset trajectories (fixed N)."""
    history: list[float] = []
    if epochs == 0:
        return model, history
    period = model.schema.sample_period if sample_period is None else sample_period
    stacked = np.stack(dataset)
    opt = nn.adam_init(model.params, lr=model.config.learning_rate)
    indices = np.arange(len(dataset))
    for epoch in range(epochs):
        order = rng.permutation(indices)
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            batch = make_traj_batch(model, stacked[chosen], period)
            loss, grads = traj_loss(model, batch, rng)
            if not np.isfinite(loss):
                raise nn.TrainingDiverged(epoch)
            nn.clip_global_norm(grads, model.config.grad_clip)
            nn.adam_step(opt, model.params, grads)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return model, history


def encode_traj(model: TrajModel, offset_traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (mu, log_var) for one workspace-unit offset trajectory."""
    xs = model.stats.apply(offset_traj.values)[None, :, :]
    cond = xs[:, -1, :][:, list(model.condition_indices)]
    steps = xs.shape[1]
    enc_inputs = np.concatenate([xs, np.repeat(cond[:, None, :], steps, axis=1)], axis=2)
    top, _ = _stack_forward(model, "enc_lstm", enc_inputs)
    mu, log_var, _ = nn.gaussian_head_forward(model.params, "enc_head", top[:, -1, :])
    return mu[0], log_var[0]


def decode_traj(model: TrajModel, z: np.ndarray, endpoint: np.ndarray) -> Trajectory:
    """Generate a length-N offset trajectory conditioned on a workspace endpoint.

    The first position sample is hard-clamped to zero; the distance between the
    generated final position and the endpoint label is reported in ``meta``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.config.latent_dim,):
        raise ValueError(f"latent must have dimension {model.config.latent_dim}")
    endpoint = np.asarray(endpoint, dtype=np.float64)
    if endpoint.shape != (model.schema.channel_count,):
        raise SchemaError("endpoint does not conform to the model schema")
    cond_idx = list(model.condition_indices)
    cond = model.stats.apply(endpoint)[cond_idx]
    outs, _ = _decode_forward(model, z[None, :], cond[None, :], model.config.n_samples)
    values = model.stats.invert(outs[0])
    pos = list(model.schema.position_indices)
    values[0, pos] = 0.0
    end_error = float(np.linalg.norm(values[-1, pos] - endpoint[pos]))
    return Trajectory(model.schema, values, meta={"endpoint_error": end_error})


def fit_traj_model(
    strokes: list[Trajectory],
    config: TrajConfig,
    rng: np.random.Generator,
    epochs: int,
    batch_size: int = 10,
) -> tuple[TrajModel, list[float]]:
    """Fit stats on origin-offset workspace strokes, then train."""
    if not strokes:
        raise ValueError("empty training set")
    schema = strokes[0].schema
    pos = list(schema.position_indices)
    for s in strokes:
        if len(s) != config.n_samples:
            raise ValueError(f"stroke length {len(s)} != configured N {config.n_samples}")
        if np.any(s.values[0, pos] != 0.0):
            raise ValueError("strokes must be offset to the origin before training")
    stacked = np.stack([s.values for s in strokes])
    stats = fit_stats_array(stacked.reshape(-1, schema.channel_count))
    model = init_traj_model(schema, config, rng)
    model.stats = stats
    normalized = [stats.apply(v) for v in stacked]
    model, history = train_traj(model, normalized, epochs, batch_size, rng)
    return model, history
