"""The composite classifier.

Three branches meet in a logistic fusion head:

  chunk matrix (r x m) -> 2-layer BiLSTM -> additive attention -> context
  freq vector (d)      -> conv(k1) -> lrelu -> pool -> conv(k2) -> lrelu
                          -> pool -> flatten -> dense -> cnn features
  peak vector (q)      -> passed through

All inputs are standardized with statistics frozen at training time and
stored on the model, so a saved model is self-contained.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import InvalidConfigError, ShapeMismatchError
from . import layers
from .attention import attention_backward, attention_forward
from .lstm import bilstm_backward, bilstm_forward


@dataclass
class ModelConfig:
    """Architecture dimensions. Defaults follow the reference setup:
    kernels 5 and 10 with two poolings in the conv stack, two
    bidirectional LSTM layers of 32 units per direction."""

    r: int
    m: int
    n_freq: int
    n_peaks: int = 9
    hidden: int = 32
    attn_dim: int = 16
    conv_channels: tuple[int, int] = (8, 16)
    kernel_sizes: tuple[int, int] = (5, 10)
    pool_width: int = 2
    cnn_out: int = 16
    leaky_slope: float = 0.01
    n_lstm_layers: int = 2

    def conv_lengths(self):
        """Lengths after each conv/pool stage; raises if any collapses."""
        k1, k2 = self.kernel_sizes
        l1 = self.n_freq - k1 + 1
        l1p = l1 // self.pool_width if l1 >= 1 else 0
        l2 = l1p - k2 + 1
        l2p = l2 // self.pool_width if l2 >= 1 else 0
        if min(l1, l1p, l2, l2p) < 1:
            raise InvalidConfigError(
                f"conv stack collapses on {self.n_freq} frequency features "
                f"(kernels {self.kernel_sizes}, pool {self.pool_width})"
            )
        return l1, l1p, l2, l2p

    @property
    def flat_size(self) -> int:
        return self.conv_channels[1] * self.conv_lengths()[3]

    @property
    def fusion_in(self) -> int:
        return 2 * self.hidden + self.cnn_out + self.n_peaks

    def validate(self):
        if min(self.r, self.m, self.n_freq, self.n_peaks, self.hidden,
               self.attn_dim, self.cnn_out) < 1:
            raise InvalidConfigError("all dimensions must be >= 1")
        self.conv_lengths()


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class CompositeClassifier:
    """Parameters plus frozen input normalization for the three branches."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    norm: dict[str, np.ndarray] = field(default_factory=dict)

    # ------------------------------------------------------------- setup
    @classmethod
    def init(cls, config: ModelConfig, seed: int = 0) -> "CompositeClassifier":
        """Seeded uniform(+-1/sqrt(fan_in)) initialization of every tensor."""
        config.validate()
        rng = np.random.default_rng(seed)
        h, a = config.hidden, config.attn_dim
        c1, c2 = config.conv_channels
        k1, k2 = config.kernel_sizes
        params: dict[str, np.ndarray] = {}
        d_in = config.r
        for layer in range(1, config.n_lstm_layers + 1):
            fan = d_in + h
            for direction in ("f", "b"):
                params[f"lstm{layer}{direction}_W"] = _uniform_init(rng, (d_in, 4 * h), fan)
                params[f"lstm{layer}{direction}_U"] = _uniform_init(rng, (h, 4 * h), fan)
                params[f"lstm{layer}{direction}_b"] = _uniform_init(rng, (4 * h,), fan)
            d_in = 2 * h
        params["attn_A"] = _uniform_init(rng, (2 * h, a), 2 * h)
        params["attn_b"] = _uniform_init(rng, (a,), 2 * h)
        params["attn_v"] = _uniform_init(rng, (a,), a)
        params["conv1_W"] = _uniform_init(rng, (c1, 1, k1), k1)
        params["conv1_b"] = _uniform_init(rng, (c1,), k1)
        params["conv2_W"] = _uniform_init(rng, (c2, c1, k2), c1 * k2)
        params["conv2_b"] = _uniform_init(rng, (c2,), c1 * k2)
        params["cnn_dense_W"] = _uniform_init(
            rng, (config.flat_size, config.cnn_out), config.flat_size
        )
        params["cnn_dense_b"] = _uniform_init(rng, (config.cnn_out,), config.flat_size)
        params["fusion_W"] = _uniform_init(rng, (config.fusion_in,), config.fusion_in)
        params["fusion_b"] = _uniform_init(rng, (1,), config.fusion_in)
        return cls(config=config, params=params)

    def copy(self) -> "CompositeClassifier":
        return CompositeClassifier(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            norm={k: v.copy() for k, v in self.norm.items()},
        )

    def zero_norm(self):
        cfg = self.config
        self.norm = {
            "chunks_mean": np.zeros(cfg.r), "chunks_std": np.ones(cfg.r),
            "freq_mean": np.zeros(cfg.n_freq), "freq_std": np.ones(cfg.n_freq),
            "peaks_mean": np.zeros(cfg.n_peaks), "peaks_std": np.ones(cfg.n_peaks),
        }

    def fit_input_norm(self, chunks, freq, peaks):
        """Freeze per-feature standardization stats from training data."""
        def _stats(x, axis):
            mean = x.mean(axis=axis)
            std = x.std(axis=axis)
            return mean, np.where(std > 0, std, 1.0)

        cm, cs = _stats(chunks, axis=(0, 2))  # per statistic row
        fm, fs = _stats(freq, axis=0)
        pm, ps = _stats(peaks, axis=0)
        self.norm = {
            "chunks_mean": cm, "chunks_std": cs,
            "freq_mean": fm, "freq_std": fs,
            "peaks_mean": pm, "peaks_std": ps,
        }

    def _normalize(self, chunks, freq, peaks):
        if not self.norm:
            self.zero_norm()
        n = self.norm
        chunks = (chunks - n["chunks_mean"][None, :, None]) / n["chunks_std"][None, :, None]
        freq = (freq - n["freq_mean"]) / n["freq_std"]
        peaks = (peaks - n["peaks_mean"]) / n["peaks_std"]
        return chunks, freq, peaks

    # ----------------------------------------------------------- forward
    def _check_shapes(self, chunks, freq, peaks):
        cfg = self.config
        if chunks.ndim != 3 or chunks.shape[1:] != (cfg.r, cfg.m):
            raise ShapeMismatchError(
                f"chunks {chunks.shape} != (B, {cfg.r}, {cfg.m})"
            )
        if freq.ndim != 2 or freq.shape[1] != cfg.n_freq:
            raise ShapeMismatchError(f"freq {freq.shape} != (B, {cfg.n_freq})")
        if peaks.ndim != 2 or peaks.shape[1] != cfg.n_peaks:
            raise ShapeMismatchError(f"peaks {peaks.shape} != (B, {cfg.n_peaks})")

    def forward_batch(self, chunks, freq, peaks):
        """(B, r, m), (B, d), (B, q) -> probabilities (B,) plus cache."""
        chunks = np.asarray(chunks, dtype=np.float64)
        freq = np.asarray(freq, dtype=np.float64)
        peaks = np.asarray(peaks, dtype=np.float64)
        self._check_shapes(chunks, freq, peaks)
        cfg = self.config
        chunks, freq, peaks = self._normalize(chunks, freq, peaks)

        seq = chunks.transpose(0, 2, 1)  # (B, m, r): one timestep per chunk
        hidden, lstm_cache = bilstm_forward(seq, self.params, cfg.n_lstm_layers)
        context, attn_weights, attn_cache = attention_forward(
            hidden, self.params["attn_A"], self.params["attn_b"],
            self.params["attn_v"],
        )

        x0 = freq[:, None, :]
        z1 = layers.conv1d(x0, self.params["conv1_W"], self.params["conv1_b"])
        a1 = layers.leaky_relu(z1, cfg.leaky_slope)
        p1, am1 = layers.max_pool(a1, cfg.pool_width)
        z2 = layers.conv1d(p1, self.params["conv2_W"], self.params["conv2_b"])
        a2 = layers.leaky_relu(z2, cfg.leaky_slope)
        p2, am2 = layers.max_pool(a2, cfg.pool_width)
        flat = p2.reshape(len(freq), -1)
        cnn_feat = layers.dense(flat, self.params["cnn_dense_W"],
                                self.params["cnn_dense_b"])

        fused = np.concatenate([context, cnn_feat, peaks], axis=1)
        logits = fused @ self.params["fusion_W"] + self.params["fusion_b"][0]
        prob = layers.sigmoid(logits)
        cache = {
            "lstm": lstm_cache, "attn": attn_cache,
            "x0": x0, "z1": z1, "a1": a1, "am1": am1, "p1": p1,
            "z2": z2, "a2": a2, "am2": am2, "p2_shape": p2.shape,
            "flat": flat, "fused": fused, "attn_weights": attn_weights,
        }
        return prob, cache

    def forward(self, chunks, freq, peaks) -> float:
        """Single-signal probability in (0, 1)."""
        prob, _ = self.forward_batch(
            np.asarray(chunks)[None], np.asarray(freq)[None],
            np.asarray(peaks)[None],
        )
        return float(prob[0])

    def attention_weights(self, chunks, freq, peaks) -> np.ndarray:
        """Per-chunk attention weights for one signal (sums to 1)."""
        _, cache = self.forward_batch(
            np.asarray(chunks)[None], np.asarray(freq)[None],
            np.asarray(peaks)[None],
        )
        return cache["attn_weights"][0]

    # ---------------------------------------------------------- backward
    def backward_batch(self, cache, dlogits):
        """Per-parameter gradients given dLoss/dlogit (B,)."""
        cfg = self.config
        grads: dict[str, np.ndarray] = {}
        fused = cache["fused"]
        grads["fusion_W"] = fused.T @ dlogits
        grads["fusion_b"] = np.array([dlogits.sum()])
        dfused = dlogits[:, None] * self.params["fusion_W"][None, :]

        width = 2 * cfg.hidden
        dcontext = dfused[:, :width]
        dcnn = dfused[:, width:width + cfg.cnn_out]

        dhidden, dA, db_a, dv = attention_backward(
            dcontext, cache["attn"], self.params["attn_A"],
            self.params["attn_v"],
        )
        grads["attn_A"] = dA
        grads["attn_b"] = db_a
        grads["attn_v"] = dv
        _, lstm_grads = bilstm_backward(dhidden, cache["lstm"], self.params,
                                        cfg.n_lstm_layers)
        grads.update(lstm_grads)

        dflat, dWd, dbd = layers.dense_backward(
            dcnn, cache["flat"], self.params["cnn_dense_W"]
        )
        grads["cnn_dense_W"] = dWd
        grads["cnn_dense_b"] = dbd
        dp2 = dflat.reshape(cache["p2_shape"])
        da2 = layers.max_pool_backward(dp2, cache["am2"], cfg.pool_width,
                                       cache["a2"].shape[-1])
        dz2 = layers.leaky_relu_backward(da2, cache["z2"], cfg.leaky_slope)
        dp1, dW2, db2 = layers.conv1d_backward(dz2, cache["p1"],
                                               self.params["conv2_W"])
        grads["conv2_W"] = dW2
        grads["conv2_b"] = db2
        da1 = layers.max_pool_backward(dp1, cache["am1"], cfg.pool_width,
                                       cache["a1"].shape[-1])
        dz1 = layers.leaky_relu_backward(da1, cache["z1"], cfg.leaky_slope)
        _, dW1, db1 = layers.conv1d_backward(dz1, cache["x0"],
                                             self.params["conv1_W"])
        grads["conv1_W"] = dW1
        grads["conv1_b"] = db1
        return grads

    def to_manifest(self) -> dict:
        return {
            "config": asdict(self.config),
            "norm": {k: v.tolist() for k, v in self.norm.items()},
            "params": [
                {"name": k, "shape": list(v.shape)}
                for k, v in sorted(self.params.items())
            ],
        }

    @classmethod
    def from_manifest(cls, manifest: dict, param_arrays: dict) -> "CompositeClassifier":
        raw = dict(manifest["config"])
        for key in ("conv_channels", "kernel_sizes"):
            raw[key] = tuple(raw[key])
        config = ModelConfig(**raw)
        model = cls(
            config=config,
            params={k: np.asarray(v, dtype=np.float64) for k, v in param_arrays.items()},
            norm={k: np.asarray(v, dtype=np.float64)
                  for k, v in manifest["norm"].items()},
        )
        expected = {e["name"]: tuple(e["shape"]) for e in manifest["params"]}
        for name, shape in expected.items():
            if name not in model.params or model.params[name].shape != shape:
                raise ShapeMismatchError(f"parameter {name} missing or misshaped")
        return model


def clone_model(model: CompositeClassifier) -> CompositeClassifier:
    return copy.deepcopy(model)
