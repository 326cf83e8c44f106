"""Additive self-attention over a sequence of hidden states.

score_t = v . tanh(hidden_t @ A + b); weights = softmax(scores);
context = sum_t weights_t * hidden_t. Weights are returned so callers
can inspect which timesteps drove a prediction.
"""

from __future__ import annotations

import numpy as np

from .layers import softmax


def attention_forward(hidden, A, b, v):
    """hidden: (B, m, D), A: (D, a), b: (a,), v: (a,).

    Returns (context (B, D), weights (B, m), cache).
    """
    u = np.tanh(hidden @ A + b)
    scores = u @ v
    weights = softmax(scores, axis=1)
    context = np.einsum("bm,bmd->bd", weights, hidden)
    return context, weights, (hidden, u, weights)


def attention_backward(dcontext, cache, A, v, dweights=None):
    """Gradients (dhidden, dA, db, dv) given d(context) and optionally
    an extra gradient on the attention weights themselves."""
    hidden, u, weights = cache
    dw = np.einsum("bd,bmd->bm", dcontext, hidden)
    dhidden = weights[:, :, None] * dcontext[:, None, :]
    if dweights is not None:
        dw = dw + dweights
    # softmax jacobian-vector product, rowwise
    ds = weights * (dw - (weights * dw).sum(axis=1, keepdims=True))
    dv = np.einsum("bma,bm->a", u, ds)
    du = ds[:, :, None] * v[None, None, :]
    dpre = du * (1.0 - u ** 2)
    dA = np.einsum("bmd,bma->da", hidden, dpre)
    db = dpre.sum(axis=(0, 1))
    dhidden = dhidden + dpre @ A.T
    return dhidden, dA, db, dv
