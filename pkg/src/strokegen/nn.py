"""Minimal deterministic numeric engine: dense/LSTM layers with hand-derived
backward passes, the reparameterization trick, the Gaussian KL term, Adam, and
finite-difference gradient verification.

Everything is float64 and functional: parameters and gradients live in plain
ordered dicts, forward passes return caches that the matching backward pass
consumes. Arrays are batched as (batch, dim); the public single-vector ops
accept 1-D inputs too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is optional, numpy path below
    _njit = None

Params = dict[str, np.ndarray]

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0
# Relative errors are measured against max(|numeric|, this floor) so that
# coordinates with near-zero true gradient do not amplify finite-difference noise.
GRAD_CHECK_FLOOR = 1e-3


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, message: str = "loss became non-finite"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # clamp at +-60 where sigmoid is saturated to double precision anyway;
    # avoids overflow warnings from exp on large negatives
    return 1.0 / (1.0 + np.exp(-np.minimum(np.maximum(x, -60.0), 60.0)))


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------------------
# Dense layer

def init_dense(rng: np.random.Generator, params: Params, name: str, in_dim: int, out_dim: int) -> None:
    params[f"{name}.W"] = _uniform_init(rng, (in_dim, out_dim), in_dim)
    params[f"{name}.b"] = np.zeros(out_dim)


def dense_forward(params: Params, name: str, x: np.ndarray, activation: str = "identity"):
    pre = x @ params[f"{name}.W"] + params[f"{name}.b"]
    if activation == "tanh":
        y = np.tanh(pre)
    elif activation == "identity":
        y = pre
    else:
        raise ValueError(f"unsupported activation {activation!r}")
    return y, (x, y, activation)


def dense_backward(params: Params, grads: Params, name: str, cache, dy: np.ndarray) -> np.ndarray:
    x, y, activation = cache
    dpre = dy * (1.0 - y * y) if activation == "tanh" else dy
    grads[f"{name}.W"] += x.T @ dpre
    grads[f"{name}.b"] += dpre.sum(axis=0)
    return dpre @ params[f"{name}.W"].T


# ---------------------------------------------------------------------------
# LSTM cell (gate layout i, f, o, g so one sigmoid covers the first three;
# forget-gate bias starts at +1)

def init_lstm(rng: np.random.Generator, params: Params, name: str, in_dim: int, hidden: int) -> None:
    params[f"{name}.W"] = _uniform_init(rng, (in_dim, 4 * hidden), in_dim)
    params[f"{name}.U"] = _uniform_init(rng, (hidden, 4 * hidden), hidden)
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0
    params[f"{name}.b"] = bias


def lstm_hidden_size(params: Params, name: str) -> int:
    return params[f"{name}.U"].shape[0]


def lstm_step(params: Params, name: str, x: np.ndarray, state: tuple[np.ndarray, np.ndarray]):
    """One gated recurrence step. Returns ((h', c'), cache)."""
    h, c = state
    single = x.ndim == 1
    if single:
        x, h, c = x[None, :], h[None, :], c[None, :]
    hidden = h.shape[1]
    a = x @ params[f"{name}.W"] + h @ params[f"{name}.U"] + params[f"{name}.b"]
    sig = _sigmoid(a[:, : 3 * hidden])
    i = sig[:, :hidden]
    f = sig[:, hidden : 2 * hidden]
    o = sig[:, 2 * hidden :]
    g = np.tanh(a[:, 3 * hidden :])
    c2 = f * c + i * g
    tanh_c2 = np.tanh(c2)
    h2 = o * tanh_c2
    cache = (x, h, c, i, f, g, o, tanh_c2, single)
    if single:
        return (h2[0], c2[0]), cache
    return (h2, c2), cache


def lstm_step_backward(params: Params, grads: Params, name: str, cache, dh2: np.ndarray, dc2: np.ndarray):
    """Backward through one step; returns (dx, dh, dc) for the inputs."""
    x, h, c, i, f, g, o, tanh_c2, single = cache
    if single:
        dh2, dc2 = dh2[None, :], dc2[None, :]
    do = dh2 * tanh_c2
    dc_total = dc2 + dh2 * o * (1.0 - tanh_c2 * tanh_c2)
    di = dc_total * g
    df = dc_total * c
    dg = dc_total * i
    dc = dc_total * f
    da = np.hstack(
        [
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            do * o * (1.0 - o),
            dg * (1.0 - g * g),
        ]
    )
    grads[f"{name}.W"] += x.T @ da
    grads[f"{name}.U"] += h.T @ da
    grads[f"{name}.b"] += da.sum(axis=0)
    dx = da @ params[f"{name}.W"].T
    dh = da @ params[f"{name}.U"].T
    if single:
        return dx[0], dh[0], dc[0]
    return dx, dh, dc


def _lstm_fwd_recurrence_numpy(xp, u, h, c, gates, cs, tanh_cs, hs):
    batch, steps, four_h = xp.shape
    hidden = four_h // 4
    for t in range(steps):
        a = xp[:, t, :] + h @ u
        gt = gates[:, t, :]
        gt[:, : 3 * hidden] = _sigmoid(a[:, : 3 * hidden])
        np.tanh(a[:, 3 * hidden :], out=gt[:, 3 * hidden :])
        i = gt[:, :hidden]
        f = gt[:, hidden : 2 * hidden]
        o = gt[:, 2 * hidden : 3 * hidden]
        g = gt[:, 3 * hidden :]
        c = f * c + i * g
        cs[:, t, :] = c
        np.tanh(c, out=tanh_cs[:, t, :])
        h = o * tanh_cs[:, t, :]
        hs[:, t, :] = h


def _lstm_bwd_recurrence_numpy(gates, cs, tanh_cs, u_t, d_hs, c0, dh, dc, da_all):
    batch, steps, four_h = da_all.shape
    hidden = four_h // 4
    for t in range(steps - 1, -1, -1):
        dh += d_hs[:, t, :]
        gt = gates[:, t, :]
        i = gt[:, :hidden]
        f = gt[:, hidden : 2 * hidden]
        o = gt[:, 2 * hidden : 3 * hidden]
        g = gt[:, 3 * hidden :]
        tc = tanh_cs[:, t, :]
        c_prev = cs[:, t - 1, :] if t > 0 else c0
        do = dh * tc
        dc_total = dc + dh * o * (1.0 - tc * tc)
        da = da_all[:, t, :]
        da[:, :hidden] = dc_total * g * (i * (1.0 - i))
        da[:, hidden : 2 * hidden] = dc_total * c_prev * (f * (1.0 - f))
        da[:, 2 * hidden : 3 * hidden] = do * (o * (1.0 - o))
        da[:, 3 * hidden :] = dc_total * i * (1.0 - g * g)
        dc = dc_total * f
        dh = np.ascontiguousarray(da) @ u_t
    return dh, dc


if _njit is not None:
    import math

    @_njit(cache=True)
    def _lstm_fwd_recurrence_jit(xp, u, h, c, gates, cs, tanh_cs, hs):  # pragma: no cover - jitted
        batch, steps, four_h = xp.shape
        hidden = four_h // 4
        for t in range(steps):
            a = xp[:, t, :].copy()
            a += h @ u
            for b in range(batch):
                for j in range(hidden):
                    ig = 1.0 / (1.0 + math.exp(-a[b, j]))
                    fg = 1.0 / (1.0 + math.exp(-a[b, hidden + j]))
                    og = 1.0 / (1.0 + math.exp(-a[b, 2 * hidden + j]))
                    gg = math.tanh(a[b, 3 * hidden + j])
                    cc = fg * c[b, j] + ig * gg
                    tc = math.tanh(cc)
                    hh = og * tc
                    gates[b, t, j] = ig
                    gates[b, t, hidden + j] = fg
                    gates[b, t, 2 * hidden + j] = og
                    gates[b, t, 3 * hidden + j] = gg
                    cs[b, t, j] = cc
                    tanh_cs[b, t, j] = tc
                    hs[b, t, j] = hh
                    c[b, j] = cc
                    h[b, j] = hh

    @_njit(cache=True)
    def _lstm_bwd_recurrence_jit(gates, cs, tanh_cs, u_t, d_hs, c0, dh, dc, da_all):  # pragma: no cover - jitted
        batch, steps, four_h = da_all.shape
        hidden = four_h // 4
        da = np.empty((batch, four_h))
        for t in range(steps - 1, -1, -1):
            for b in range(batch):
                for j in range(hidden):
                    ig = gates[b, t, j]
                    fg = gates[b, t, hidden + j]
                    og = gates[b, t, 2 * hidden + j]
                    gg = gates[b, t, 3 * hidden + j]
                    tc = tanh_cs[b, t, j]
                    c_prev = cs[b, t - 1, j] if t > 0 else c0[b, j]
                    dh_v = dh[b, j] + d_hs[b, t, j]
                    do = dh_v * tc
                    dct = dc[b, j] + dh_v * og * (1.0 - tc * tc)
                    da[b, j] = dct * gg * (ig * (1.0 - ig))
                    da[b, hidden + j] = dct * c_prev * (fg * (1.0 - fg))
                    da[b, 2 * hidden + j] = do * (og * (1.0 - og))
                    da[b, 3 * hidden + j] = dct * ig * (1.0 - gg * gg)
                    dc[b, j] = dct * fg
            da_all[:, t, :] = da
            dh[:, :] = da @ u_t
        return dh, dc


def _fwd_recurrence(xp, u, h, c, gates, cs, tanh_cs, hs):
    if _njit is not None:
        _lstm_fwd_recurrence_jit(xp, u, h, c, gates, cs, tanh_cs, hs)
    else:
        _lstm_fwd_recurrence_numpy(xp, u, h, c, gates, cs, tanh_cs, hs)


def _bwd_recurrence(gates, cs, tanh_cs, u_t, d_hs, c0, dh, dc, da_all):
    if _njit is not None:
        return _lstm_bwd_recurrence_jit(gates, cs, tanh_cs, u_t, d_hs, c0, dh, dc, da_all)
    return _lstm_bwd_recurrence_numpy(gates, cs, tanh_cs, u_t, d_hs, c0, dh, dc, da_all)


def lstm_seq_forward(
    params: Params,
    name: str,
    inputs: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
):
    """Unrolls the cell over (batch, steps, dim) inputs.

    The input projection runs as one matmul over all steps; only the hidden
    recurrence stays inside the sequential loop. Returns (hs, cache) with hs
    of shape (batch, steps, hidden).
    """
    w = params[f"{name}.W"]
    u = params[f"{name}.U"]
    batch, steps, in_dim = inputs.shape
    hidden = u.shape[0]
    xp = (inputs.reshape(batch * steps, in_dim) @ w).reshape(batch, steps, 4 * hidden)
    xp += params[f"{name}.b"]
    h = np.zeros((batch, hidden)) if h0 is None else np.ascontiguousarray(h0)
    c = np.zeros((batch, hidden)) if c0 is None else np.ascontiguousarray(c0)
    gates = np.empty((batch, steps, 4 * hidden))
    cs = np.empty((batch, steps, hidden))
    tanh_cs = np.empty((batch, steps, hidden))
    hs = np.empty((batch, steps, hidden))
    _fwd_recurrence(xp, np.ascontiguousarray(u), h.copy(), c.copy(), gates, cs, tanh_cs, hs)
    cache = (inputs, gates, cs, tanh_cs, hs, h0, c0)
    return hs, cache


def lstm_seq_backward(
    params: Params,
    grads: Params,
    name: str,
    cache,
    d_hs: np.ndarray | None,
    dh_last: np.ndarray | None = None,
    dc_last: np.ndarray | None = None,
):
    """Backward through the unrolled cell.

    ``d_hs`` carries per-step output gradients (may be None); ``dh_last``/
    ``dc_last`` inject extra gradient on the final state. Returns
    (d_inputs, dh0, dc0).
    """
    inputs, gates, cs, tanh_cs, hs, h0, c0 = cache
    w = params[f"{name}.W"]
    u = params[f"{name}.U"]
    batch, steps, in_dim = inputs.shape
    hidden = u.shape[0]
    dh = np.zeros((batch, hidden)) if dh_last is None else np.ascontiguousarray(dh_last).copy()
    dc = np.zeros((batch, hidden)) if dc_last is None else np.ascontiguousarray(dc_last).copy()
    if d_hs is None:
        d_hs = np.zeros((batch, steps, hidden))
    c0_arr = np.zeros((batch, hidden)) if c0 is None else np.ascontiguousarray(c0)
    da_all = np.empty((batch, steps, 4 * hidden))
    dh, dc = _bwd_recurrence(
        gates, cs, tanh_cs, np.ascontiguousarray(u.T), np.ascontiguousarray(d_hs), c0_arr, dh, dc, da_all
    )
    flat_da = da_all.reshape(batch * steps, 4 * hidden)
    grads[f"{name}.W"] += inputs.reshape(batch * steps, in_dim).T @ flat_da
    grads[f"{name}.b"] += flat_da.sum(axis=0)
    hs_prev = np.empty_like(hs)
    hs_prev[:, 0, :] = 0.0 if h0 is None else h0
    hs_prev[:, 1:, :] = hs[:, :-1, :]
    grads[f"{name}.U"] += hs_prev.reshape(batch * steps, hidden).T @ flat_da
    d_inputs = (flat_da @ w.T).reshape(batch, steps, in_dim)
    return d_inputs, dh, dc


# ---------------------------------------------------------------------------
# Gaussian head: hidden state -> (mu, log sigma^2), log-variance clamped

def init_gaussian_head(rng: np.random.Generator, params: Params, name: str, in_dim: int, latent: int) -> None:
    init_dense(rng, params, f"{name}.mu", in_dim, latent)
    init_dense(rng, params, f"{name}.logvar", in_dim, latent)


def gaussian_head_forward(params: Params, name: str, h: np.ndarray):
    mu, mu_cache = dense_forward(params, f"{name}.mu", h)
    raw, lv_cache = dense_forward(params, f"{name}.logvar", h)
    log_var = np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)
    pass_through = (raw > LOGVAR_MIN) & (raw < LOGVAR_MAX)
    return mu, log_var, (mu_cache, lv_cache, pass_through)


def gaussian_head_backward(params: Params, grads: Params, name: str, cache, dmu: np.ndarray, dlog_var: np.ndarray):
    mu_cache, lv_cache, pass_through = cache
    dh = dense_backward(params, grads, f"{name}.mu", mu_cache, dmu)
    dh += dense_backward(params, grads, f"{name}.logvar", lv_cache, dlog_var * pass_through)
    return dh


# ---------------------------------------------------------------------------
# KL divergence to the standard normal and the reparameterization trick

def kl_divergence(mu: np.ndarray, log_var: np.ndarray) -> float:
    """-(1/2) sum(1 + log_var - mu^2 - exp(log_var)): the nonnegative KL."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise ValueError("mu and log_var must have equal shapes")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(log_var))):
        raise ValueError("non-finite inputs to kl_divergence")
    return float(-0.5 * np.sum(1.0 + log_var - mu * mu - np.exp(log_var)))


def kl_terms(mu: np.ndarray, log_var: np.ndarray) -> np.ndarray:
    """Per-row KL for a (batch, latent) pair of arrays."""
    return -0.5 * np.sum(1.0 + log_var - mu * mu - np.exp(log_var), axis=1)


def kl_backward(mu: np.ndarray, log_var: np.ndarray, dkl: np.ndarray):
    """Gradients of per-row KL scaled by dkl (shape (batch,) or scalar)."""
    dkl = np.asarray(dkl)[..., None]
    dmu = dkl * mu
    dlog_var = dkl * 0.5 * (np.exp(log_var) - 1.0)
    return dmu, dlog_var


def reparameterize(mu: np.ndarray, log_var: np.ndarray, rng: np.random.Generator | None):
    """z = mu + sigma * eps with eps ~ N(0, I); rng=None means zero noise (z = mu)."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.clip(np.asarray(log_var, dtype=np.float64), LOGVAR_MIN, LOGVAR_MAX)
    eps = np.zeros_like(mu) if rng is None else rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * log_var) * eps, eps


def reparameterize_backward(log_var: np.ndarray, eps: np.ndarray, dz: np.ndarray):
    log_var = np.clip(log_var, LOGVAR_MIN, LOGVAR_MAX)
    dmu = dz
    dlog_var = dz * eps * 0.5 * np.exp(0.5 * log_var)
    return dmu, dlog_var


# ---------------------------------------------------------------------------
# Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def adam_init(params: Params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, value in params.items():
        state.m[name] = np.zeros_like(value)
        state.v[name] = np.zeros_like(value)
    return state


def adam_step(state: AdamState, params: Params, grads: Params) -> None:
    """Standard bias-corrected update, in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[name] = params[name] - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# Gradient helpers

def zero_grads(params: Params) -> Params:
    return {name: np.zeros_like(value) for name, value in params.items()}


def global_norm(grads: Params) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_global_norm(grads: Params, max_norm: float) -> float:
    """Scales grads in place when their global norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


def flatten(params: Params) -> np.ndarray:
    return np.concatenate([params[name].ravel() for name in params])


def assign_flat(params: Params, flat: np.ndarray) -> None:
    pos = 0
    for name in params:
        size = params[name].size
        params[name] = flat[pos : pos + size].reshape(params[name].shape)
        pos += size
    if pos != flat.size:
        raise ValueError("flat vector size mismatch")


def grad_check(params: Params, loss_fn, n_coords: int = 200, step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between analytic gradients and central differences.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic. A random subset
    of at least ``n_coords`` parameter coordinates is probed (all of them when
    the model is smaller than that).
    """
    _, analytic = loss_fn(params)
    flat = flatten(params)
    flat_analytic = flatten(analytic)
    total = flat.size
    rng = np.random.default_rng(seed)
    if total <= n_coords:
        coords = np.arange(total)
    else:
        coords = rng.choice(total, size=n_coords, replace=False)

    work = {name: value.copy() for name, value in params.items()}
    worst = 0.0
    for idx in coords:
        original = flat[idx]
        flat[idx] = original + step
        assign_flat(work, flat)
        loss_plus, _ = loss_fn(work)
        flat[idx] = original - step
        assign_flat(work, flat)
        loss_minus, _ = loss_fn(work)
        flat[idx] = original
        numeric = (loss_plus - loss_minus) / (2.0 * step)
        err = abs(flat_analytic[idx] - numeric) / max(abs(numeric), GRAD_CHECK_FLOOR)
        worst = max(worst, err)
    assign_flat(work, flat)
    return worst
