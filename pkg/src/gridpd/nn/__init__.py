"""Composite classifier: BiLSTM-with-attention over chunk statistics,
1D CNN over selected spectral magnitudes, raw peak statistics, fused by
a logistic head. All gradients are hand-derived reverse mode."""

from .model import CompositeClassifier, ModelConfig
from .loss import weighted_bce, weighted_bce_logit_grad, class_weights
from .optim import AdamState, adam_step
from .train import TrainConfig, ModelBundle, train, fine_tune_per_cluster

__all__ = [
    "CompositeClassifier", "ModelConfig",
    "weighted_bce", "weighted_bce_logit_grad", "class_weights",
    "AdamState", "adam_step",
    "TrainConfig", "ModelBundle", "train", "fine_tune_per_cluster",
]
