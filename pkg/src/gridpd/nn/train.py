"""Training, per-cluster fine-tuning, and routed prediction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateLabelsError
from .loss import class_weights, weighted_bce, weighted_bce_logit_grad
from .model import CompositeClassifier, ModelConfig
from .optim import AdamState, adam_step, clip_gradients


@dataclass
class TrainConfig:
    """Optimization settings. w_p/w_n of None means inverse-class-ratio
    weights computed from whatever labels the run sees."""

    lr: float = 0.001
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    w_p: float | None = None
    w_n: float | None = None
    grad_clip: float | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


def _resolve_weights(cfg: TrainConfig, labels):
    if cfg.w_p is not None and cfg.w_n is not None:
        return cfg.w_p, cfg.w_n
    return class_weights(labels)


def train(chunks, freq, peaks, labels, cfg: TrainConfig,
          model_config: ModelConfig | None = None,
          init_model: CompositeClassifier | None = None):
    """Mini-batch Adam on the weighted cross-entropy.

    Pass ``init_model`` to continue training a copy of an existing
    model (used by fine-tuning; the copy keeps the base normalization).
    Returns (model, per-epoch mean training loss).
    """
    chunks = np.asarray(chunks, dtype=np.float64)
    freq = np.asarray(freq, dtype=np.float64)
    peaks = np.asarray(peaks, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if labels.sum() == 0 or labels.sum() == n:
        raise DegenerateLabelsError("need at least one sample of each class")

    if init_model is not None:
        model = init_model.copy()
    else:
        if model_config is None:
            model_config = ModelConfig(
                r=chunks.shape[1], m=chunks.shape[2], n_freq=freq.shape[1],
                n_peaks=peaks.shape[1],
            )
        model = CompositeClassifier.init(model_config, seed=cfg.seed)
        model.fit_input_norm(chunks, freq, peaks)

    w_p, w_n = _resolve_weights(cfg, labels)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_params(model.params)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            probs, cache = model.forward_batch(
                chunks[batch], freq[batch], peaks[batch]
            )
            loss = weighted_bce(probs, labels[batch], w_p, w_n)
            dlogits = weighted_bce_logit_grad(probs, labels[batch], w_p, w_n)
            grads = model.backward_batch(cache, dlogits)
            if cfg.grad_clip is not None:
                clip_gradients(grads, cfg.grad_clip)
            adam_step(model.params, grads, state, cfg.lr)
            epoch_loss += loss * len(batch)
        history.append(epoch_loss / n)
    return model, history


@dataclass
class ModelBundle:
    """Base classifier plus fine-tuned per-cluster variants.

    Prediction routes each signal through the model of its assigned
    frequency cluster, falling back to the base model for clusters that
    had no usable fine-tuning data.
    """

    base: CompositeClassifier
    per_cluster: dict[int, CompositeClassifier] = field(default_factory=dict)
    cluster_model: object | None = None  # FrequencyKMeans
    selection: object | None = None      # SpectrumSelection

    def model_for(self, cluster_id: int) -> CompositeClassifier:
        return self.per_cluster.get(int(cluster_id), self.base)

    def predict_proba(self, chunks, freq, peaks) -> np.ndarray:
        """Routed probabilities for a batch of featureized signals."""
        chunks = np.asarray(chunks, dtype=np.float64)
        freq = np.asarray(freq, dtype=np.float64)
        peaks = np.asarray(peaks, dtype=np.float64)
        out = np.empty(len(freq))
        if self.cluster_model is None or not self.per_cluster:
            probs, _ = self.base.forward_batch(chunks, freq, peaks)
            return probs
        assignments = self.cluster_model.predict(freq)
        for cid in np.unique(assignments):
            members = assignments == cid
            model = self.model_for(cid)
            probs, _ = model.forward_batch(
                chunks[members], freq[members], peaks[members]
            )
            out[members] = probs
        return out

    def predict(self, chunks, freq, peaks) -> float:
        """Routed probability for one signal."""
        return float(self.predict_proba(
            np.asarray(chunks)[None], np.asarray(freq)[None],
            np.asarray(peaks)[None],
        )[0])


def fine_tune_per_cluster(base: CompositeClassifier, cluster_model,
                          chunks, freq, peaks, labels,
                          cfg: TrainConfig) -> ModelBundle:
    """Continue training a copy of ``base`` on each cluster's subset.

    Class weights are recomputed from each cluster's own label balance.
    Clusters without both classes keep the base model.
    """
    chunks = np.asarray(chunks, dtype=np.float64)
    freq = np.asarray(freq, dtype=np.float64)
    peaks = np.asarray(peaks, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    assignments = cluster_model.predict(freq)
    bundle = ModelBundle(base=base, cluster_model=cluster_model)
    for cid in range(cluster_model.k):
        members = np.flatnonzero(assignments == cid)
        if len(members) == 0:
            continue
        subset_labels = labels[members]
        n_pos = int(subset_labels.sum())
        if n_pos == 0 or n_pos == len(members):
            continue  # degenerate cluster: fall back to base
        sub_cfg = TrainConfig(
            lr=cfg.lr, epochs=cfg.epochs, batch_size=cfg.batch_size,
            seed=cfg.seed + cid + 1, w_p=None, w_n=None,
            grad_clip=cfg.grad_clip,
        )
        tuned, _ = train(
            chunks[members], freq[members], peaks[members], subset_labels,
            sub_cfg, init_model=base,
        )
        bundle.per_cluster[cid] = tuned
    return bundle
