"""Upper model: a recurrent VAE over sequences of stroke endpoint pairs.

The encoder is one LSTM over the M endpoint-pair vectors feeding a Gaussian
head (6-D latent by default). The decoder maps z to an initial LSTM state,
unrolls M steps with z fed at every step, and emits one endpoint pair per step
through a tanh hidden layer and a linear readout. Sequences of different
stroke counts share one model via explicit lengths and loss masking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .core import ChannelSchema, NormalizationStats, SchemaError, StrokeEndpoints, fit_stats_array


@dataclass
class PointConfig:
    latent_dim: int = 6
    hidden: int = 64
    m_max: int = 8
    learning_rate: float = 1e-3
    grad_clip: float = 5.0


@dataclass
class PointModel:
    schema: ChannelSchema
    stats: NormalizationStats  # over the 2C pair-vector channels
    config: PointConfig
    params: nn.Params = field(default_factory=dict)

    @property
    def pair_dim(self) -> int:
        return 2 * self.schema.channel_count


PARAM_BLOCKS = ("enc_lstm", "enc_head.mu", "enc_head.logvar", "dec_init", "dec_lstm", "dec_hidden", "dec_out")


def init_point_model(schema: ChannelSchema, config: PointConfig, rng: np.random.Generator) -> PointModel:
    pair_dim = 2 * schema.channel_count
    stats = NormalizationStats(np.zeros(pair_dim), np.ones(pair_dim))
    model = PointModel(schema, stats, config)
    p = model.params
    h = config.hidden
    nn.init_lstm(rng, p, "enc_lstm", pair_dim, h)
    nn.init_gaussian_head(rng, p, "enc_head", h, config.latent_dim)
    nn.init_dense(rng, p, "dec_init", config.latent_dim, 2 * h)
    nn.init_lstm(rng, p, "dec_lstm", config.latent_dim, h)
    nn.init_dense(rng, p, "dec_hidden", h, h)
    nn.init_dense(rng, p, "dec_out", h, pair_dim)
    return model


def endpoint_sequence_array(seq: list[StrokeEndpoints]) -> np.ndarray:
    if not seq:
        raise ValueError("empty endpoint sequence")
    return np.stack([ep.pair_vector() for ep in seq])


@dataclass
class PointBatch:
    """Zero-padded normalized pair vectors plus explicit sequence lengths."""

    pairs: np.ndarray  # (B, T, 2C)
    lengths: np.ndarray  # (B,)

    def __post_init__(self):
        if self.pairs.ndim != 3:
            raise ValueError("pairs must be (batch, steps, pair_dim)")
        if np.any(self.lengths < 1) or np.any(self.lengths > self.pairs.shape[1]):
            raise ValueError("lengths out of range")

    @property
    def mask(self) -> np.ndarray:
        steps = np.arange(self.pairs.shape[1])
        return steps[None, :] < self.lengths[:, None]


def make_point_batch(sequences: list[np.ndarray], pad_to: int | None = None) -> PointBatch:
    lengths = np.array([s.shape[0] for s in sequences])
    t = int(lengths.max()) if pad_to is None else pad_to
    width = sequences[0].shape[1]
    pairs = np.zeros((len(sequences), t, width))
    for b, s in enumerate(sequences):
        pairs[b, : s.shape[0]] = s
    return PointBatch(pairs, lengths)


# ---------------------------------------------------------------------------
# Forward passes

def _encode_forward(model: PointModel, pairs: np.ndarray, lengths: np.ndarray):
    p = model.params
    batch = pairs.shape[0]
    hs, seq_cache = nn.lstm_seq_forward(p, "enc_lstm", pairs)
    h_final = hs[np.arange(batch), lengths - 1]
    mu, log_var, head_cache = nn.gaussian_head_forward(p, "enc_head", h_final)
    return mu, log_var, (seq_cache, head_cache, lengths)


def _decode_forward(model: PointModel, z: np.ndarray, steps: int):
    p = model.params
    hidden = model.config.hidden
    batch = z.shape[0]
    init, init_cache = nn.dense_forward(p, "dec_init", z, "tanh")
    h0, c0 = init[:, :hidden], init[:, hidden:]
    step_inputs = np.repeat(z[:, None, :], steps, axis=1)
    hs, seq_cache = nn.lstm_seq_forward(p, "dec_lstm", step_inputs, h0, c0)
    flat = hs.reshape(batch * steps, hidden)
    hid, hid_cache = nn.dense_forward(p, "dec_hidden", flat, "tanh")
    out, out_cache = nn.dense_forward(p, "dec_out", hid)
    outs = out.reshape(batch, steps, -1)
    return outs, (init_cache, seq_cache, hid_cache, out_cache)


# ---------------------------------------------------------------------------
# Public operations

def encode_points(model: PointModel, seq: list[StrokeEndpoints]) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (mu, log_var) for one normalized endpoint sequence."""
    if not seq:
        raise ValueError("empty endpoint sequence")
    if len(seq) > model.config.m_max:
        raise ValueError(f"sequence length {len(seq)} exceeds m_max {model.config.m_max}")
    arr = endpoint_sequence_array(seq)
    if arr.shape[1] != model.pair_dim:
        raise SchemaError("endpoint width does not match model schema")
    mu, log_var, _ = _encode_forward(model, arr[None, :, :], np.array([len(seq)]))
    return mu[0], log_var[0]


def decode_points(model: PointModel, z: np.ndarray, m_count: int) -> list[StrokeEndpoints]:
    """Decode m_count endpoint pairs in stroke order, denormalized to workspace units."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (model.config.latent_dim,):
        raise ValueError(f"latent must have dimension {model.config.latent_dim}")
    if not 1 <= m_count <= model.config.m_max:
        raise ValueError(f"m_count must be in [1, {model.config.m_max}]")
    outs, _ = _decode_forward(model, z[None, :], m_count)
    pairs = model.stats.invert(outs[0])
    c = model.schema.channel_count
    return [StrokeEndpoints(pairs[m, :c], pairs[m, c:], m + 1) for m in range(m_count)]


def point_loss(model: PointModel, batch: PointBatch, rng: np.random.Generator | None):
    """Masked reconstruction MSE plus KL; returns (scalar loss, gradients)."""
    p = model.params
    grads = nn.zero_grads(p)
    pairs, lengths = batch.pairs, batch.lengths
    batch_size, steps, _ = pairs.shape
    mask = batch.mask.astype(np.float64)

    mu, log_var, enc_cache = _encode_forward(model, pairs, lengths)
    z, eps = nn.reparameterize(mu, log_var, rng)
    outs, dec_cache = _decode_forward(model, z, steps)

    diff = (outs - pairs) * mask[:, :, None]
    recon = np.sum(diff * diff, axis=(1, 2)) / lengths
    kl = nn.kl_terms(mu, log_var)
    loss = float(np.mean(recon + kl))
    if not np.isfinite(loss):
        return loss, grads

    # reconstruction gradient, masked and averaged over the batch
    d_outs = (2.0 / batch_size) * diff / lengths[:, None, None]

    init_cache, seq_cache, hid_cache, out_cache = dec_cache
    hidden = model.config.hidden
    pair_dim = pairs.shape[2]
    dhid = nn.dense_backward(p, grads, "dec_out", out_cache, d_outs.reshape(batch_size * steps, pair_dim))
    d_hs = nn.dense_backward(p, grads, "dec_hidden", hid_cache, dhid).reshape(batch_size, steps, hidden)
    d_inputs, dh0, dc0 = nn.lstm_seq_backward(p, grads, "dec_lstm", seq_cache, d_hs)
    dz = d_inputs.sum(axis=1)  # z is fed at every decoder step
    dz += nn.dense_backward(p, grads, "dec_init", init_cache, np.hstack([dh0, dc0]))

    dmu, dlog_var = nn.reparameterize_backward(log_var, eps, dz)
    dmu_kl, dlv_kl = nn.kl_backward(mu, log_var, np.full(batch_size, 1.0 / batch_size))
    dmu += dmu_kl
    dlog_var += dlv_kl

    enc_seq_cache, head_cache, lengths = enc_cache
    dh_final = nn.gaussian_head_backward(p, grads, "enc_head", head_cache, dmu, dlog_var)
    d_hs_enc = np.zeros((batch_size, steps, hidden))
    d_hs_enc[np.arange(batch_size), lengths - 1] = dh_final
    nn.lstm_seq_backward(p, grads, "enc_lstm", enc_seq_cache, d_hs_enc)

    return loss, grads


def train_point(
    model: PointModel,
    dataset: list[np.ndarray],
    epochs: int,
    batch_size: int,
    rng: np.random.Generator,
) -> tuple[PointModel, list[float]]:
    """Minibatch Adam training over normalized pair-vector sequences.

    One epoch is a full pass over the shuffled dataset. Raises
    TrainingDiverged when the loss stops being finite.
    """
    history: list[float] = []
    if epochs == 0:
        return model, history
    opt = nn.adam_init(model.params, lr=model.config.learning_rate)
    indices = np.arange(len(dataset))
    for epoch in range(epochs):
        order = rng.permutation(indices)
        epoch_losses = []
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            batch = make_point_batch([dataset[i] for i in chosen])
            loss, grads = point_loss(model, batch, rng)
            if not np.isfinite(loss):
                raise nn.TrainingDiverged(epoch)
            nn.clip_global_norm(grads, model.config.grad_clip)
            nn.adam_step(opt, model.params, grads)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return model, history


def fit_point_model(
    sequences: list[list[StrokeEndpoints]],
    schema: ChannelSchema,
    config: PointConfig,
    rng: np.random.Generator,
    epochs: int,
    batch_size: int = 4,
) -> tuple[PointModel, list[float]]:
    """Fit normalization stats on workspace-unit sequences, then train."""
    arrays = [endpoint_sequence_array(seq) for seq in sequences]
    stats = fit_stats_array(np.vstack(arrays))
    model = init_point_model(schema, config, rng)
    model.stats = stats
    normalized = [stats.apply(a) for a in arrays]
    model, history = train_point(model, normalized, epochs, batch_size, rng)
    return model, history


def normalize_endpoint_seq(model: PointModel, seq: list[StrokeEndpoints]) -> list[StrokeEndpoints]:
    """Workspace-unit endpoint sequence mapped into the model's normalized space."""
    c = model.schema.channel_count
    out = []
    for ep in seq:
        pair = model.stats.apply(ep.pair_vector())
        out.append(StrokeEndpoints(pair[:c], pair[c:], ep.stroke_index))
    return out
