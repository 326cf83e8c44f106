"""Class-weighted binary cross-entropy.

Probabilities are clipped to [1e-12, 1 - 1e-12] inside the loss so it
stays finite; the logit gradient uses the unclipped probability (exact
away from the clip, standard elsewhere).
"""

from __future__ import annotations

import numpy as np

from ..errors import WeightNonPositiveError

PROB_EPS = 1e-12


def class_weights(labels) -> tuple[float, float]:
    """Inverse-ratio weights: w_c = n_total / n_c for each class."""
    labels = np.asarray(labels)
    n = len(labels)
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise WeightNonPositiveError(
            "both classes must be present to derive weights"
        )
    return n / n_pos, n / n_neg


def weighted_bce(probs, labels, w_p=1.0, w_n=1.0) -> float:
    """Mean of -[w_p*y*ln(p) + w_n*(1-y)*ln(1-p)] over the batch."""
    if w_p <= 0 or w_n <= 0:
        raise WeightNonPositiveError(f"weights must be > 0, got {w_p}, {w_n}")
    p = np.clip(np.asarray(probs, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(labels, dtype=np.float64)
    terms = w_p * y * np.log(p) + w_n * (1.0 - y) * np.log(1.0 - p)
    return float(-terms.mean())


def weighted_bce_logit_grad(probs, labels, w_p=1.0, w_n=1.0) -> np.ndarray:
    """d(loss)/d(logit) with mean reduction, via the sigmoid identity."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return (w_p * y * (p - 1.0) + w_n * (1.0 - y) * p) / len(p)
