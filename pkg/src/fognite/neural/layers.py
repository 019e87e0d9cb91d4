"""Layer kernels: forward passes plus hand-derived backward passes.

Conventions:
  * batch-first arrays, float64 everywhere
  * each forward returns (output, cache); the matching backward consumes
    the cache and returns input/parameter gradients
  * dense weights are (out, in), so y = x @ w.T + b
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


# --- dense / relu / dropout -------------------------------------------------


def dense_forward(x, w, b):
    return x @ w.T + b, x


def dense_backward(dy, x, w):
    """Returns (dx, dw, db)."""
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(dy, mask):
    return dy * mask


def dropout_forward(x, rate: float, rng: np.random.Generator):
    """Inverted dropout: surviving units are scaled by 1/(1-rate)."""
    if rate <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# --- 1-d convolution (single input channel, valid padding, stride 1) --------


def conv1d_forward(x, w, b):
    """x: (B, W); w: (F, K); b: (F,) -> y: (B, F, W-K+1)."""
    _, width = x.shape
    _, k = w.shape
    length = width - k + 1
    idx = np.arange(length)[:, None] + np.arange(k)[None, :]
    windows = x[:, idx]                                   # (B, L, K)
    y = np.einsum("blk,fk->bfl", windows, w) + b[None, :, None]
    return y, (x, windows)


def conv1d_backward(dy, cache, w):
    """Returns (dx, dw, db)."""
    x, windows = cache
    dw = np.einsum("bfl,blk->fk", dy, windows)
    db = dy.sum(axis=(0, 2))
    length = dy.shape[2]
    dx = np.zeros_like(x)
    for j in range(w.shape[1]):
        dx[:, j : j + length] += np.einsum("bfl,f->bl", dy, w[:, j])
    return dx, dw, db


# --- max pooling over the sequence axis (stride = width) ---------------------


def maxpool_forward(y, width: int):
    """y: (B, F, L) -> (B, F, L // width); a trailing remainder is dropped."""
    b, f, length = y.shape
    pooled_len = length // width
    view = y[:, :, : pooled_len * width].reshape(b, f, pooled_len, width)
    arg = view.argmax(axis=3)
    out = np.take_along_axis(view, arg[..., None], axis=3)[..., 0]
    return out, (arg, y.shape, width)


def maxpool_backward(dout, cache):
    arg, shape, width = cache
    b, f, _ = shape
    pooled_len = dout.shape[2]
    dview = np.zeros((b, f, pooled_len, width))
    np.put_along_axis(dview, arg[..., None], dout[..., None], axis=3)
    dy = np.zeros(shape)
    dy[:, :, : pooled_len * width] = dview.reshape(b, f, pooled_len * width)
    return dy


# --- LSTM (one direction, final hidden state only) ---------------------------
#
# Gate packing along the first weight axis is [input, forget, cell, output],
# each hidden_size rows:
#   a_t = Wx x_t + Wh h_{t-1} + b
#   i, f, o = sigmoid(a_i, a_f, a_o);  g = tanh(a_g)
#   c_t = f * c_{t-1} + i * g;  h_t = o * tanh(c_t)


def lstm_forward(seq, wx, wh, b):
    """seq: (B, T, F) -> final hidden state (B, H) plus per-step cache."""
    batch, steps, _ = seq.shape
    hidden = wh.shape[1]
    x_proj = seq @ wx.T + b                               # (B, T, 4H)
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    step_cache = []
    for t in range(steps):
        a = x_proj[:, t, :] + h @ wh.T
        ai, af, ag, ao = np.split(a, 4, axis=1)
        gi, gf, go = sigmoid(ai), sigmoid(af), sigmoid(ao)
        gg = np.tanh(ag)
        c_prev, h_prev = c, h
        c = gf * c_prev + gi * gg
        tc = np.tanh(c)
        h = go * tc
        step_cache.append((gi, gf, gg, go, c_prev, tc, h_prev))
    return h, (seq, step_cache)


def lstm_backward(dh_last, cache, wx, wh):
    """Backprop from the final hidden state. Returns (dseq, dwx, dwh, db)."""
    seq, step_cache = cache
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(wx.shape[0])
    dseq = np.zeros_like(seq)
    dh = dh_last
    dc = np.zeros_like(dh_last)
    for t in range(len(step_cache) - 1, -1, -1):
        gi, gf, gg, go, c_prev, tc, h_prev = step_cache[t]
        do = dh * tc
        dc = dc + dh * go * (1.0 - tc * tc)
        di = dc * gg
        dg = dc * gi
        df = dc * c_prev
        dc = dc * gf
        da = np.concatenate(
            [
                di * gi * (1.0 - gi),
                df * gf * (1.0 - gf),
                dg * (1.0 - gg * gg),
                do * go * (1.0 - go),
            ],
            axis=1,
        )
        dwx += da.T @ seq[:, t, :]
        dwh += da.T @ h_prev
        db += da.sum(axis=0)
        dseq[:, t, :] = da @ wx
        dh = da @ wh
    return dseq, dwx, dwh, db
