"""Elementary layers with matching forward/backward pairs.

Shapes follow the (batch, channels, length) convention for the conv
stack. Every backward takes the upstream gradient and returns gradients
in the same order its forward consumed inputs.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ShapeMismatchError


def sigmoid(z):
    return expit(z)


def softmax(s, axis=-1):
    shifted = s - s.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def leaky_relu(x, slope=0.01):
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(dout, x, slope=0.01):
    return dout * np.where(x > 0, 1.0, slope)


def conv1d(x, weights, bias, stride=1):
    """Valid (no padding) cross-correlation.

    x: (B, c_in, L), weights: (c_out, c_in, k), bias: (c_out,)
    -> (B, c_out, L - k + 1). Only stride 1 is implemented.
    """
    if stride != 1:
        raise NotImplementedError("stride != 1 unsupported")
    k = weights.shape[2]
    if x.ndim != 3 or x.shape[1] != weights.shape[1]:
        raise ShapeMismatchError(
            f"input {x.shape} incompatible with weights {weights.shape}"
        )
    if x.shape[2] < k:
        raise ShapeMismatchError(
            f"input length {x.shape[2]} shorter than kernel {k}"
        )
    windows = sliding_window_view(x, k, axis=2)  # (B, c_in, Lo, k)
    return np.einsum("bilk,oik->bol", windows, weights) + bias[None, :, None]


def conv1d_backward(dout, x, weights):
    """Gradients of conv1d: (dx, dweights, dbias)."""
    k = weights.shape[2]
    windows = sliding_window_view(x, k, axis=2)
    dw = np.einsum("bilk,bol->oik", windows, dout)
    db = dout.sum(axis=(0, 2))
    padded = np.pad(dout, ((0, 0), (0, 0), (k - 1, k - 1)))
    dwin = sliding_window_view(padded, k, axis=2)  # (B, c_out, L, k)
    dx = np.einsum("bolk,oik->bil", dwin, weights[:, :, ::-1])
    return dx, dw, db


def max_pool(x, width=2):
    """Channel-wise max over adjacent windows; a trailing incomplete
    window is dropped. Returns (pooled, argmax cache)."""
    if width < 1:
        raise ShapeMismatchError("pool width must be >= 1")
    pooled_len = x.shape[-1] // width
    if pooled_len == 0:
        raise ShapeMismatchError(
            f"length {x.shape[-1]} too short for pool width {width}"
        )
    trimmed = x[..., : pooled_len * width]
    windows = trimmed.reshape(*x.shape[:-1], pooled_len, width)
    return windows.max(axis=-1), windows.argmax(axis=-1)


def max_pool_backward(dout, argmax, width, in_length):
    """Scatter gradients back to the max positions (first max on ties)."""
    dx = np.zeros(dout.shape[:-1] + (in_length,))
    grid = np.indices(dout.shape)
    positions = grid[-1] * width + argmax
    dx[tuple(grid[:-1]) + (positions,)] = dout
    return dx


def dense(x, weights, bias):
    """x: (B, d_in) @ (d_in, d_out) + (d_out,)."""
    if x.shape[1] != weights.shape[0]:
        raise ShapeMismatchError(
            f"input {x.shape} incompatible with weights {weights.shape}"
        )
    return x @ weights + bias


def dense_backward(dout, x, weights):
    return dout @ weights.T, x.T @ dout, dout.sum(axis=0)
