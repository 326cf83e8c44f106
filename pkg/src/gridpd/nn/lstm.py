"""Stacked bidirectional LSTM with hand-derived BPTT.

Gate layout inside the fused (4H) dimension is [input, forget, cell,
output]. Hidden and cell states start at zero; the backward direction
simply walks the timesteps in reverse, writing its outputs back at the
original positions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ShapeMismatchError


def lstm_layer_forward(x, W, U, b, reverse=False):
    """One direction over a (B, m, d_in) sequence.

    W: (d_in, 4H), U: (H, 4H), b: (4H,). Returns hidden states
    (B, m, H) and the per-step cache needed for BPTT.
    """
    B, m, d_in = x.shape
    H = U.shape[0]
    if W.shape != (d_in, 4 * H):
        raise ShapeMismatchError(
            f"W {W.shape} incompatible with input dim {d_in}, hidden {H}"
        )
    hs = np.zeros((B, m, H))
    cache = [None] * m
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = range(m - 1, -1, -1) if reverse else range(m)
    for t in steps:
        z = x[:, t] @ W + h @ U + b
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = expit(z[:, 3 * H:])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        cache[t] = (x[:, t], h, c, i, f, g, o, c_new)
        h, c = h_new, c_new
        hs[:, t] = h
    return hs, cache


def lstm_layer_backward(dhs, cache, W, U, reverse=False):
    """BPTT through one direction.

    dhs: (B, m, H) upstream gradients on every timestep's output.
    Returns (dx, dW, dU, db).
    """
    B, m, H = dhs.shape
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dx = np.zeros((B, m, W.shape[0]))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    steps = range(m) if reverse else range(m - 1, -1, -1)
    for t in steps:
        x_t, h_prev, c_prev, i, f, g, o, c_new = cache[t]
        dh = dhs[:, t] + dh_next
        tanh_c = np.tanh(c_new)
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
        df = dc * c_prev
        di = dc * g
        dg = dc * i
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g ** 2),
            do * o * (1.0 - o),
        ], axis=1)
        dW += x_t.T @ dz
        dU += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ W.T
        dh_next = dz @ U.T
        dc_next = dc * f
    return dx, dW, dU, db


def bilstm_forward(x, params, n_layers=2, prefix="lstm"):
    """Stacked bidirectional pass.

    x: (B, m, r). Layer l, direction d parameters live at
    params[f"{prefix}{l}{d}_{W,U,b}"] with d in {"f", "b"}. Returns the
    top layer's (B, m, 2H) concatenated states and a cache list.
    """
    caches = []
    inp = x
    for layer in range(1, n_layers + 1):
        hf, cf = lstm_layer_forward(
            inp, params[f"{prefix}{layer}f_W"], params[f"{prefix}{layer}f_U"],
            params[f"{prefix}{layer}f_b"], reverse=False,
        )
        hb, cb = lstm_layer_forward(
            inp, params[f"{prefix}{layer}b_W"], params[f"{prefix}{layer}b_U"],
            params[f"{prefix}{layer}b_b"], reverse=True,
        )
        caches.append((cf, cb))
        inp = np.concatenate([hf, hb], axis=2)
    return inp, caches


def bilstm_backward(dout, caches, params, n_layers=2, prefix="lstm"):
    """Gradients for every LSTM parameter plus the model input.

    dout: (B, m, 2H) gradient on the top layer's output.
    Returns (dx, grads dict).
    """
    grads = {}
    H = dout.shape[2] // 2
    for layer in range(n_layers, 0, -1):
        cf, cb = caches[layer - 1]
        dxf, dWf, dUf, dbf = lstm_layer_backward(
            dout[:, :, :H], cf,
            params[f"{prefix}{layer}f_W"], params[f"{prefix}{layer}f_U"],
            reverse=False,
        )
        dxb, dWb, dUb, dbb = lstm_layer_backward(
            dout[:, :, H:], cb,
            params[f"{prefix}{layer}b_W"], params[f"{prefix}{layer}b_U"],
            reverse=True,
        )
        grads[f"{prefix}{layer}f_W"] = dWf
        grads[f"{prefix}{layer}f_U"] = dUf
        grads[f"{prefix}{layer}f_b"] = dbf
        grads[f"{prefix}{layer}b_W"] = dWb
        grads[f"{prefix}{layer}b_U"] = dUb
        grads[f"{prefix}{layer}b_b"] = dbb
        dout = dxf + dxb
    return dout, grads
