import numpy as np
import pytest
from helpers_grad import random_inputs, tiny_config

from gridpd.cluster import FrequencyKMeans
from gridpd.errors import (
    DegenerateLabelsError,
    ShapeMismatchError,
    WeightNonPositiveError,
)
from gridpd.nn.checkpoint import load_bundle, load_model, save_bundle, save_model
from gridpd.nn.loss import class_weights, weighted_bce
from gridpd.nn.model import CompositeClassifier
from gridpd.nn.optim import AdamState, adam_step
from gridpd.nn.train import (
    ModelBundle,
    TrainConfig,
    fine_tune_per_cluster,
    train,
)


class TestWeightedBce:
    def test_near_perfect_prediction(self):
        p = np.array([0.999999, 1e-6])
        y = np.array([1, 0])
        assert weighted_bce(p, y) <= 2e-6

    def test_coin_flip_is_ln2(self):
        p = np.full(8, 0.5)
        y = np.array([0, 1] * 4)
        assert weighted_bce(p, y) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_unit_weights_equal_plain_ce(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.05, 0.95, size=20)
        y = rng.integers(0, 2, size=20)
        plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert weighted_bce(p, y, 1.0, 1.0) == pytest.approx(plain, abs=1e-12)

    def test_class_weights_inverse_ratio(self):
        labels = np.array([1] * 525 + [0] * 8187)
        w_p, w_n = class_weights(labels)
        assert w_p == pytest.approx(8712 / 525)
        assert w_n == pytest.approx(8712 / 8187)
        assert w_p == pytest.approx(16.5943, abs=1e-4)
        assert w_n == pytest.approx(1.06413, abs=1e-5)

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(WeightNonPositiveError):
            weighted_bce(np.array([0.5]), np.array([1]), w_p=0.0)

    def test_extreme_probabilities_stay_finite(self):
        loss = weighted_bce(np.array([0.0, 1.0]), np.array([1, 0]), 2.0, 3.0)
        assert np.isfinite(loss)


class TestForward:
    def test_all_zero_params_give_half(self):
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=0)
        for name in model.params:
            model.params[name][:] = 0.0
        rng = np.random.default_rng(1)
        chunks, freq, peaks, _ = random_inputs(rng, config, batch=1)
        assert model.forward(chunks[0], freq[0], peaks[0]) == 0.5

    def test_fusion_bias_ten(self):
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=0)
        for name in model.params:
            model.params[name][:] = 0.0
        model.params["fusion_b"][0] = 10.0
        rng = np.random.default_rng(2)
        chunks, freq, peaks, _ = random_inputs(rng, config, batch=1)
        p = model.forward(chunks[0], freq[0], peaks[0])
        assert p == pytest.approx(1.0 / (1.0 + np.exp(-10.0)), abs=1e-12)
        assert p == pytest.approx(0.9999546, abs=1e-7)

    def test_deterministic(self):
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=3)
        rng = np.random.default_rng(3)
        chunks, freq, peaks, _ = random_inputs(rng, config, batch=2)
        a, _ = model.forward_batch(chunks, freq, peaks)
        b, _ = model.forward_batch(chunks, freq, peaks)
        assert np.array_equal(a, b)

    def test_probability_in_open_interval(self):
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=4)
        rng = np.random.default_rng(4)
        chunks, freq, peaks, _ = random_inputs(rng, config, batch=5)
        probs, _ = model.forward_batch(chunks, freq, peaks)
        assert np.all((probs > 0.0) & (probs < 1.0))

    def test_shape_mismatch(self):
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=0)
        with pytest.raises(ShapeMismatchError):
            model.forward_batch(np.zeros((1, 2, 2)), np.zeros((1, 4)),
                                np.zeros((1, 4)))

    def test_logit_invariance_under_inverse_rescale(self):
        # scaling the fused inputs by c and fusion weights by 1/c keeps
        # the decision identical
        config = tiny_config()
        model = CompositeClassifier.init(config, seed=6)
        rng = np.random.default_rng(6)
        fused = rng.standard_normal((4, config.fusion_in))
        w = model.params["fusion_W"]
        b = model.params["fusion_b"][0]
        logits = fused @ w + b
        c = 37.5
        rescaled = (c * fused) @ (w / c) + b
        assert np.allclose(logits, rescaled, rtol=1e-12)
        assert np.array_equal(logits >= 0, rescaled >= 0)


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        assert np.array_equal(params["w"], [1.0, -2.0])

    def test_first_step_size_is_lr(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.array([1.0])}, state, lr=0.001)
        assert params["w"][0] == pytest.approx(-0.001, rel=1e-6)

    def test_minimizes_quadratic(self):
        params = {"w": np.array([1.0])}
        state = AdamState.for_params(params)
        for _ in range(500):
            grads = {"w": 2.0 * params["w"]}
            adam_step(params, grads, state, lr=0.01)
        assert abs(params["w"][0]) < 1e-2

    def test_shape_mismatch(self):
        params = {"w": np.zeros(3)}
        state = AdamState.for_params(params)
        with pytest.raises(ShapeMismatchError):
            adam_step(params, {"w": np.zeros(4)}, state)


def separable_data(rng, config, n=40):
    """Features where one chunk-stat row directly encodes the label."""
    chunks = rng.standard_normal((n, config.r, config.m)) * 0.1
    freq = rng.standard_normal((n, config.n_freq)) * 0.1
    peaks = rng.standard_normal((n, config.n_peaks)) * 0.1
    labels = np.array([0, 1] * (n // 2))
    chunks[labels == 1, 0, :] += 3.0
    freq[labels == 1] += 2.0
    peaks[labels == 1, 0] += 3.0
    return chunks, freq, peaks, labels


class TestTrain:
    def test_zero_epochs_returns_initialization(self):
        config = tiny_config()
        rng = np.random.default_rng(7)
        chunks, freq, peaks, labels = random_inputs(rng, config, batch=6)
        cfg = TrainConfig(epochs=0, seed=9)
        model, history = train(chunks, freq, peaks, labels, cfg,
                               model_config=config)
        reference = CompositeClassifier.init(config, seed=9)
        assert history == []
        for name in reference.params:
            assert np.array_equal(model.params[name], reference.params[name])

    def test_separable_data_converges(self):
        config = tiny_config()
        rng = np.random.default_rng(8)
        chunks, freq, peaks, labels = separable_data(rng, config)
        cfg = TrainConfig(lr=0.01, epochs=200, batch_size=8, seed=0)
        model, history = train(chunks, freq, peaks, labels, cfg,
                               model_config=config)
        assert history[-1] < 0.1 * history[0]

    def test_same_seed_same_history(self):
        config = tiny_config()
        rng = np.random.default_rng(9)
        chunks, freq, peaks, labels = separable_data(rng, config, n=20)
        cfg = TrainConfig(lr=0.005, epochs=5, batch_size=4, seed=3)
        _, h1 = train(chunks, freq, peaks, labels, cfg, model_config=config)
        _, h2 = train(chunks, freq, peaks, labels, cfg, model_config=config)
        assert h1 == h2

    def test_degenerate_labels_rejected(self):
        config = tiny_config()
        rng = np.random.default_rng(10)
        chunks, freq, peaks, _ = random_inputs(rng, config, batch=4)
        with pytest.raises(DegenerateLabelsError):
            train(chunks, freq, peaks, np.zeros(4, dtype=int),
                  TrainConfig(epochs=1), model_config=config)

    def test_loss_history_finite(self):
        config = tiny_config()
        rng = np.random.default_rng(11)
        chunks, freq, peaks, labels = separable_data(rng, config, n=16)
        cfg = TrainConfig(lr=0.01, epochs=10, batch_size=4, seed=1,
                          grad_clip=5.0)
        _, history = train(chunks, freq, peaks, labels, cfg,
                           model_config=config)
        assert np.all(np.isfinite(history))


def cluster_model_for(freq, k=2, seed=0):
    return FrequencyKMeans(k=k, seed=seed).fit(freq)


class TestFineTune:
    def test_zero_epochs_identical_to_base(self):
        config = tiny_config()
        rng = np.random.default_rng(12)
        chunks, freq, peaks, labels = separable_data(rng, config, n=24)
        base, _ = train(chunks, freq, peaks, labels,
                        TrainConfig(epochs=2, seed=0), model_config=config)
        cm = cluster_model_for(freq)
        bundle = fine_tune_per_cluster(base, cm, chunks, freq, peaks, labels,
                                       TrainConfig(epochs=0, seed=0))
        for model in bundle.per_cluster.values():
            for name in base.params:
                assert np.array_equal(model.params[name], base.params[name])

    def test_routing_uses_cluster_model(self):
        config = tiny_config()
        rng = np.random.default_rng(13)
        chunks, freq, peaks, labels = separable_data(rng, config, n=24)
        base, _ = train(chunks, freq, peaks, labels,
                        TrainConfig(epochs=2, seed=0), model_config=config)
        cm = cluster_model_for(freq)
        bundle = fine_tune_per_cluster(base, cm, chunks, freq, peaks, labels,
                                       TrainConfig(epochs=3, seed=0))
        assignments = cm.predict(freq)
        routed = bundle.predict_proba(chunks, freq, peaks)
        for i in range(len(freq)):
            model = bundle.model_for(assignments[i])
            want = model.forward(chunks[i], freq[i], peaks[i])
            assert routed[i] == pytest.approx(want, abs=1e-12)

    def test_degenerate_cluster_falls_back_to_base(self):
        config = tiny_config()
        rng = np.random.default_rng(14)
        chunks, freq, peaks, labels = separable_data(rng, config, n=24)
        # separate the two label groups in frequency space so one
        # cluster is all-positive and the other all-negative
        freq = rng.standard_normal((24, config.n_freq)) * 0.05
        freq[labels == 1] += 10.0
        base, _ = train(chunks, freq, peaks, labels,
                        TrainConfig(epochs=1, seed=0), model_config=config)
        cm = cluster_model_for(freq)
        bundle = fine_tune_per_cluster(base, cm, chunks, freq, peaks, labels,
                                       TrainConfig(epochs=3, seed=0))
        assert bundle.per_cluster == {}
        probs = bundle.predict_proba(chunks, freq, peaks)
        pooled, _ = base.forward_batch(chunks, freq, peaks)
        assert np.allclose(probs, pooled)

    def test_empty_bundle_equals_base(self):
        config = tiny_config()
        rng = np.random.default_rng(15)
        chunks, freq, peaks, labels = separable_data(rng, config, n=8)
        base, _ = train(chunks, freq, peaks, labels,
                        TrainConfig(epochs=1, seed=0), model_config=config)
        bundle = ModelBundle(base=base)
        got = bundle.predict_proba(chunks, freq, peaks)
        want, _ = base.forward_batch(chunks, freq, peaks)
        assert np.array_equal(got, want)


class TestCheckpoint:
    def test_model_round_trip(self, tmp_path):
        config = tiny_config()
        rng = np.random.default_rng(16)
        chunks, freq, peaks, labels = separable_data(rng, config, n=16)
        model, _ = train(chunks, freq, peaks, labels,
                         TrainConfig(epochs=2, seed=4), model_config=config)
        save_model(model, tmp_path / "ckpt")
        loaded = load_model(tmp_path / "ckpt")
        assert loaded.config == model.config
        # parameters survive f32 quantization
        for name in model.params:
            assert np.allclose(loaded.params[name], model.params[name],
                               atol=1e-6)
        p_orig, _ = model.forward_batch(chunks, freq, peaks)
        p_load, _ = loaded.forward_batch(chunks, freq, peaks)
        assert np.allclose(p_orig, p_load, atol=1e-4)

    def test_bundle_round_trip(self, tmp_path):
        config = tiny_config()
        rng = np.random.default_rng(17)
        chunks, freq, peaks, labels = separable_data(rng, config, n=24)
        base, _ = train(chunks, freq, peaks, labels,
                        TrainConfig(epochs=1, seed=0), model_config=config)
        cm = cluster_model_for(freq)
        bundle = fine_tune_per_cluster(base, cm, chunks, freq, peaks, labels,
                                       TrainConfig(epochs=1, seed=0))
        save_bundle(bundle, tmp_path / "bundle")
        loaded = load_bundle(tmp_path / "bundle")
        assert sorted(loaded.per_cluster) == sorted(bundle.per_cluster)
        a = bundle.predict_proba(chunks, freq, peaks)
        b = loaded.predict_proba(chunks, freq, peaks)
        assert np.allclose(a, b, atol=1e-4)
