import numpy as np
import pytest

from gridpd.cluster import (
    FrequencyKMeans,
    cluster_report,
    load_cluster_model,
    save_cluster_model,
    silhouette_mean,
    sweep_k,
)
from gridpd.errors import (
    DimensionMismatchError,
    SingleClusterError,
    TooFewPointsError,
)


def blobs(rng, centers, sizes, spread=0.1):
    points = []
    labels = []
    for idx, (center, size) in enumerate(zip(centers, sizes)):
        points.append(center + spread * rng.standard_normal((size, len(center))))
        labels += [idx] * size
    return np.vstack(points), np.array(labels)


class TestKMeansFit:
    def test_k1_centroid_is_standardized_mean(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((40, 3)) * 5 + 2
        model = FrequencyKMeans(k=1, seed=0).fit(X)
        assert np.allclose(model.centroids_[0], 0.0, atol=1e-12)
        # standardized data has unit variance per dim: inertia = n * d
        assert model.inertia_ == pytest.approx(40 * 3, rel=1e-9)

    def test_two_blobs_recovered(self):
        rng = np.random.default_rng(1)
        X, truth = blobs(rng, [np.array([0.0, 0.0]), np.array([20.0, 20.0])],
                         [30, 25])
        model = FrequencyKMeans(k=2, seed=3).fit(X)
        pred = model.predict(X)
        # same partition up to cluster relabeling
        assert len(np.unique(pred[truth == 0])) == 1
        assert len(np.unique(pred[truth == 1])) == 1
        assert pred[truth == 0][0] != pred[truth == 1][0]

    def test_k_equals_n_zero_inertia(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((6, 2)) * 3
        model = FrequencyKMeans(k=6, seed=0).fit(X)
        assert model.inertia_ == pytest.approx(0.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            FrequencyKMeans(k=5).fit(np.zeros((3, 2)))

    def test_inertia_non_increasing(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((200, 4))
        model = FrequencyKMeans(k=6, seed=1, tol=0.0, max_iter=25).fit(X)
        hist = model.inertia_history_
        assert all(hist[i + 1] <= hist[i] + 1e-9 for i in range(len(hist) - 1))

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((50, 3))
        a = FrequencyKMeans(k=4, seed=9).fit(X)
        b = FrequencyKMeans(k=4, seed=9).fit(X)
        assert np.array_equal(a.centroids_, b.centroids_)
        assert np.array_equal(a.labels_, b.labels_)

    def test_zero_variance_dims_dropped(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((30, 3))
        X[:, 1] = 7.0
        model = FrequencyKMeans(k=2, seed=0).fit(X)
        assert list(model.dropped_dims_) == [1]
        assert model.centroids_.shape[1] == 2


class TestAssign:
    def fitted(self):
        rng = np.random.default_rng(6)
        X, _ = blobs(rng, [np.zeros(2), np.full(2, 30.0), np.full(2, -30.0)],
                     [20, 20, 20])
        return FrequencyKMeans(k=3, seed=2).fit(X), X

    def test_assigning_centroid_returns_its_id(self):
        model, X = self.fitted()
        # map a centroid back through the stored normalization
        for j in range(model.k):
            raw = model.centroids_[j] * model.feature_std_[model.kept_dims_] \
                + model.feature_mean_[model.kept_dims_]
            assert model.assign(raw) == j

    def test_tie_goes_to_lower_id(self):
        model = FrequencyKMeans(k=2)
        model.centroids_ = np.array([[1.0], [-1.0]])
        model.feature_mean_ = np.zeros(1)
        model.feature_std_ = np.ones(1)
        model.kept_dims_ = np.array([0])
        model.dropped_dims_ = np.array([], dtype=np.int64)
        model.n_features_in_ = 1
        assert model.assign(np.array([0.0])) == 0

    def test_dimension_mismatch(self):
        model, _ = self.fitted()
        with pytest.raises(DimensionMismatchError):
            model.assign(np.zeros(5))


def brute_silhouette(X, labels):
    """Direct per-point evaluation with explicit loops."""
    n = len(X)
    total = 0.0
    for i in range(n):
        same = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not same:
            continue  # singleton: s(i) = 0
        a = np.mean([np.linalg.norm(X[i] - X[j]) for j in same])
        b = min(
            np.mean([np.linalg.norm(X[i] - X[j])
                     for j in range(n) if labels[j] == c])
            for c in set(labels.tolist()) if c != labels[i]
        )
        total += (b - a) / max(a, b)
    return total / n


class TestSilhouette:
    def test_two_pair_hand_case(self):
        X = np.array([[0.0], [1.0], [10.0], [11.0]])
        labels = np.array([0, 0, 1, 1])
        want = (9.5 / 10.5 + 8.5 / 9.5 + 8.5 / 9.5 + 9.5 / 10.5) / 4
        got = silhouette_mean(X, labels)
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.899749, abs=1e-6)

    def test_coincident_duplicates_score_one(self):
        X = np.array([[0.0, 0.0]] * 3 + [[5.0, 5.0]] * 4)
        labels = np.array([0] * 3 + [1] * 4)
        assert silhouette_mean(X, labels) == pytest.approx(1.0)

    def test_singleton_cluster_contributes_zero(self):
        X = np.array([[0.0], [0.5], [9.0]])
        labels = np.array([0, 0, 1])
        got = silhouette_mean(X, labels)
        assert got == pytest.approx(brute_silhouette(X, labels), abs=1e-12)

    def test_single_cluster_rejected(self):
        with pytest.raises(SingleClusterError):
            silhouette_mean(np.zeros((4, 2)), np.zeros(4, dtype=int))

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            n = int(rng.integers(20, 80))
            X = rng.standard_normal((n, 3))
            labels = rng.integers(0, 4, size=n)
            if len(np.unique(labels)) < 2:
                continue
            got = silhouette_mean(X, labels)
            assert got == pytest.approx(brute_silhouette(X, labels), abs=1e-9)
            assert -1.0 <= got <= 1.0

    def test_blocked_computation_matches_unblocked(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((100, 2))
        labels = rng.integers(0, 3, size=100)
        assert silhouette_mean(X, labels, block=7) == pytest.approx(
            silhouette_mean(X, labels, block=1000), abs=1e-12
        )


class TestSweepK:
    def test_three_blob_argmax(self):
        rng = np.random.default_rng(9)
        X, _ = blobs(rng, [np.zeros(2), np.array([15.0, 0.0]),
                           np.array([0.0, 15.0])], [25, 25, 25], spread=0.5)
        rows = sweep_k(X, range(2, 7), seed=0)
        ks = [k for k, _ in rows]
        scores = [s for _, s in rows]
        assert ks == [2, 3, 4, 5, 6]
        assert ks[int(np.argmax(scores))] == 3

    def test_singleton_range(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((30, 2))
        rows = sweep_k(X, [2], seed=0)
        assert len(rows) == 1 and rows[0][0] == 2

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((40, 2))
        assert sweep_k(X, range(2, 5), seed=5) == sweep_k(X, range(2, 5), seed=5)


class TestClusterReport:
    def test_all_negative_labels(self):
        rng = np.random.default_rng(12)
        X, _ = blobs(rng, [np.zeros(2), np.full(2, 10.0)], [15, 15])
        model = FrequencyKMeans(k=2, seed=0).fit(X)
        report = cluster_report(model, X, np.zeros(30, dtype=int))
        assert np.all(report.positive_rates == 0.0)
        assert report.sizes.sum() == 30

    def test_k1_report(self):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((10, 2))
        labels = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 0])
        model = FrequencyKMeans(k=1, seed=0).fit(X)
        report = cluster_report(model, X, labels)
        assert report.sizes[0] == 10
        assert report.positive_counts[0] == 4
        assert report.positive_rates[0] == pytest.approx(0.4)
        assert report.silhouette_mean == 0.0

    def test_partition_and_ordering(self):
        rng = np.random.default_rng(14)
        sizes = [40, 25, 10]
        X, truth = blobs(rng, [np.zeros(2), np.full(2, 12.0),
                               np.array([12.0, -12.0])], sizes)
        labels = np.zeros(len(X), dtype=int)
        # different positive rates per true blob: 0.1, 0.4, 0.8
        for blob_id, rate in ((0, 0.1), (1, 0.4), (2, 0.8)):
            members = np.flatnonzero(truth == blob_id)
            labels[members[: int(rate * len(members))]] = 1
        model = FrequencyKMeans(k=3, seed=1).fit(X)
        report = cluster_report(model, X, labels)
        assert report.sizes.sum() == len(X)
        assert report.positive_counts.sum() == labels.sum()
        rates = list(report.positive_rates)
        assert rates == sorted(rates)

    def test_csv_write(self, tmp_path):
        rng = np.random.default_rng(15)
        X, _ = blobs(rng, [np.zeros(2), np.full(2, 9.0)], [8, 8])
        labels = np.tile([0, 1], 8)
        model = FrequencyKMeans(k=2, seed=0).fit(X)
        report = cluster_report(model, X, labels)
        path = tmp_path / "report.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "cluster,size,positive_count,positive_rate"
        assert len(lines) == 4  # 2 clusters + header + silhouette comment


def test_model_json_round_trip(tmp_path):
    rng = np.random.default_rng(16)
    X = rng.standard_normal((30, 4))
    X[:, 2] = 1.0  # dropped dim
    model = FrequencyKMeans(k=3, seed=7).fit(X)
    path = tmp_path / "model.json"
    save_cluster_model(model, path)
    loaded = load_cluster_model(path)
    assert np.array_equal(loaded.predict(X), model.predict(X))
    assert loaded.inertia_ == pytest.approx(model.inertia_)
    assert list(loaded.dropped_dims_) == [2]
