"""Unsupervised grouping of signals by their selected-frequency features.

Plain Lloyd k-means with k-means++ style seeding on standardized
features, deterministic for a given seed. Silhouette scoring uses exact
pairwise Euclidean distances, computed in row blocks so memory stays
bounded at large n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    DimensionMismatchError,
    IoFailureError,
    SingleClusterError,
    TooFewPointsError,
    UnlabeledSetError,
)
from .validation import as_float_matrix, as_label_vector, check_fitted


@dataclass
class ClusterReport:
    """Per-cluster composition, ordered by ascending positive rate."""

    cluster_ids: np.ndarray
    sizes: np.ndarray
    positive_counts: np.ndarray
    positive_rates: np.ndarray
    silhouette_mean: float

    def write_csv(self, path) -> None:
        try:
            with open(path, "w") as fh:
                fh.write("cluster,size,positive_count,positive_rate\n")
                for c, s, p, r in zip(self.cluster_ids, self.sizes,
                                      self.positive_counts,
                                      self.positive_rates):
                    fh.write(f"{c},{s},{p},{repr(float(r))}\n")
                fh.write(f"# silhouette_mean,{repr(self.silhouette_mean)}\n")
        except OSError as exc:
            raise IoFailureError(f"cannot write {path}: {exc}") from exc


def _standardize_fit(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = np.flatnonzero(std > 0.0)
    dropped = np.flatnonzero(std == 0.0)
    return mean, std, keep, dropped


def _kmeanspp_seed(Xs, k, rng):
    n = len(Xs)
    centroids = np.empty((k, Xs.shape[1]))
    first = rng.integers(n)
    centroids[0] = Xs[first]
    d2 = ((Xs - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            choice = rng.integers(n)
        else:
            choice = rng.choice(n, p=d2 / total)
        centroids[j] = Xs[choice]
        d2 = np.minimum(d2, ((Xs - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _sq_dist_to_centroids(Xs, centroids):
    # (n, k) squared distances
    return (
        (Xs ** 2).sum(axis=1)[:, None]
        - 2.0 * Xs @ centroids.T
        + (centroids ** 2).sum(axis=1)[None, :]
    )


class FrequencyKMeans(BaseEstimator):
    """Lloyd k-means on standardized features.

    Zero-variance dimensions are dropped before standardization and
    recorded in ``dropped_dims_``. Assignment breaks ties toward the
    lower cluster id. ``inertia_`` is the sum of squared distances to
    the closest centroid, in standardized space.
    """

    def __init__(self, k=5, seed=0, max_iter=100, tol=1e-6):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter
        self.tol = tol
        self.centroids_ = None

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        n, d = X.shape
        if self.k < 1 or n < self.k:
            raise TooFewPointsError(f"need n >= k >= 1, got n={n}, k={self.k}")
        mean, std, keep, dropped = _standardize_fit(X)
        if len(keep) == 0:
            # all-constant features: one usable pseudo-dimension of zeros
            Xs = np.zeros((n, 1))
        else:
            Xs = (X[:, keep] - mean[keep]) / std[keep]
        rng = np.random.default_rng(self.seed)
        centroids = _kmeanspp_seed(Xs, self.k, rng)
        inertia_history = []
        for _ in range(self.max_iter):
            d2 = _sq_dist_to_centroids(Xs, centroids)
            labels = np.argmin(d2, axis=1)
            inertia_history.append(float(d2[np.arange(n), labels].sum()))
            new_centroids = centroids.copy()
            for j in range(self.k):
                members = labels == j
                if members.any():
                    new_centroids[j] = Xs[members].mean(axis=0)
                else:
                    # re-seed an empty cluster at the worst-fit point
                    farthest = int(np.argmax(d2[np.arange(n), labels]))
                    new_centroids[j] = Xs[farthest]
            shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
            centroids = new_centroids
            if shift < self.tol:
                break
        d2 = _sq_dist_to_centroids(Xs, centroids)
        labels = np.argmin(d2, axis=1)
        self.centroids_ = centroids
        self.labels_ = labels
        self.inertia_ = float(d2[np.arange(n), labels].sum())
        self.inertia_history_ = inertia_history + [self.inertia_]
        self.feature_mean_ = mean
        self.feature_std_ = std
        self.kept_dims_ = keep
        self.dropped_dims_ = dropped
        self.n_features_in_ = d
        return self

    def _transform(self, X):
        X = as_float_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatchError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        keep = self.kept_dims_
        if len(keep) == 0:
            return np.zeros((len(X), 1))
        return (X[:, keep] - self.feature_mean_[keep]) / self.feature_std_[keep]

    def predict(self, X):
        """Nearest-centroid ids, ties to the lower id."""
        check_fitted(self, "centroids_")
        Xs = self._transform(X)
        return np.argmin(_sq_dist_to_centroids(Xs, self.centroids_), axis=1)

    def assign(self, feature):
        """Cluster id of a single feature vector."""
        return int(self.predict(np.asarray(feature)[None, :])[0])

    def to_json_dict(self) -> dict:
        check_fitted(self, "centroids_")
        return {
            "k": int(self.k),
            "seed": int(self.seed),
            "centroids": self.centroids_.tolist(),
            "norm": {
                "mean": self.feature_mean_.tolist(),
                "std": self.feature_std_.tolist(),
            },
            "dropped_dims": [int(i) for i in self.dropped_dims_],
            "inertia": self.inertia_,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FrequencyKMeans":
        model = cls(k=int(d["k"]), seed=int(d["seed"]))
        model.centroids_ = np.asarray(d["centroids"], dtype=np.float64)
        model.feature_mean_ = np.asarray(d["norm"]["mean"], dtype=np.float64)
        model.feature_std_ = np.asarray(d["norm"]["std"], dtype=np.float64)
        model.dropped_dims_ = np.asarray(d["dropped_dims"], dtype=np.int64)
        model.kept_dims_ = np.setdiff1d(
            np.arange(len(model.feature_mean_)), model.dropped_dims_
        )
        model.inertia_ = float(d["inertia"])
        model.n_features_in_ = len(model.feature_mean_)
        return model


def save_cluster_model(model: FrequencyKMeans, path) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(model.to_json_dict(), fh, indent=2)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def load_cluster_model(path) -> FrequencyKMeans:
    with open(path) as fh:
        return FrequencyKMeans.from_json_dict(json.load(fh))


def silhouette_mean(features, assignments, block=512) -> float:
    """Mean silhouette over all points, exact pairwise distances.

    s(i) = (b(i) - a(i)) / max(a(i), b(i)) where a(i) is the mean
    distance to the other members of i's cluster and b(i) the smallest
    mean distance to another cluster. Points in singleton clusters get
    s(i) = 0.
    """
    X = as_float_matrix(features)
    assignments = np.asarray(assignments, dtype=np.int64)
    n = len(X)
    if n < 2 or len(assignments) != n:
        raise ValueError("need n >= 2 aligned features/assignments")
    cluster_ids, counts = np.unique(assignments, return_counts=True)
    if len(cluster_ids) < 2:
        raise SingleClusterError("silhouette needs >= 2 non-empty clusters")
    onehot = assignments[:, None] == cluster_ids[None, :]  # (n, C)
    sq_norms = (X ** 2).sum(axis=1)
    s_total = 0.0
    for start in range(0, n, block):
        stop = min(n, start + block)
        d2 = (
            sq_norms[start:stop, None]
            - 2.0 * X[start:stop] @ X.T
            + sq_norms[None, :]
        )
        dist = np.sqrt(np.maximum(d2, 0.0))
        sums = dist @ onehot  # (rows, C) distance sums per cluster
        for row, i in enumerate(range(start, stop)):
            own_pos = int(np.searchsorted(cluster_ids, assignments[i]))
            own_count = counts[own_pos]
            if own_count == 1:
                continue  # s(i) = 0 by convention
            a = sums[row, own_pos] / (own_count - 1)
            other = np.delete(sums[row] / counts, own_pos)
            b = other.min()
            denom = max(a, b)
            if denom > 0.0:
                s_total += (b - a) / denom
    return s_total / n


def sweep_k(features, k_range, seed=0, max_iter=100, tol=1e-6):
    """Fit each k and report (k, mean silhouette); deterministic given seed."""
    X = as_float_matrix(features)
    out = []
    for k in k_range:
        model = FrequencyKMeans(k=k, seed=seed, max_iter=max_iter, tol=tol).fit(X)
        score = silhouette_mean(model._transform(X), model.labels_)
        out.append((int(k), float(score)))
    return out


def cluster_report(model: FrequencyKMeans, features, labels) -> ClusterReport:
    """Composition of each cluster on labeled data.

    Rows are ordered by ascending positive rate (ties by cluster id);
    sizes and positive counts partition the totals by construction.
    With a single non-empty cluster the silhouette is reported as 0.
    """
    X = as_float_matrix(features)
    labels = as_label_vector(labels)
    if len(labels) != len(X):
        raise UnlabeledSetError("labels must align with features")
    assignments = model.predict(X)
    sizes = np.zeros(model.k, dtype=np.int64)
    pos = np.zeros(model.k, dtype=np.int64)
    for j in range(model.k):
        members = assignments == j
        sizes[j] = members.sum()
        pos[j] = labels[members].sum()
    with np.errstate(invalid="ignore"):
        rates = np.where(sizes > 0, pos / np.maximum(sizes, 1), 0.0)
    order = np.lexsort((np.arange(model.k), rates))
    if len(np.unique(assignments)) >= 2:
        sil = silhouette_mean(model._transform(X), assignments)
    else:
        sil = 0.0
    return ClusterReport(
        cluster_ids=np.arange(model.k)[order],
        sizes=sizes[order],
        positive_counts=pos[order],
        positive_rates=rates[order],
        silhouette_mean=float(sil),
    )
