"""End-to-end orchestration: features -> selection -> clustering ->
training -> per-cluster fine-tuning -> evaluation, plus the stage
timing benchmark. The PartialDischargeDetector estimator is the
programmatic face; run_end_to_end adds the on-disk artifacts."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .cluster import FrequencyKMeans, cluster_report, save_cluster_model
from .errors import EmptySetError, IoFailureError, UnlabeledSetError
from .freqfeat import (
    SpectrumBinSelector,
    SpectrumSelection,
    dft_magnitudes,
    mi_report,
    save_selection,
    sparse_project,
)
from .metrics import Metrics, compute_metrics, write_metrics_csv
from .nn.checkpoint import save_bundle
from .nn.train import ModelBundle, TrainConfig, fine_tune_per_cluster, train
from .signals import SignalSet
from .timefeat import (
    ChunkStatisticsExtractor,
    PeakFeatureExtractor,
    chunk_statistics,
    default_neighborhood,
    extract_peaks,
    high_pass,
)
from .validation import check_fitted


class PartialDischargeDetector(BaseEstimator):
    """Composite detector with sklearn-style fit/predict on SignalSets.

    fit() runs the full training recipe; predict_proba() routes each
    signal through its frequency cluster's fine-tuned model (use
    base_predict_proba for the pooled model). All stages share one
    seed, so two fits on the same data are identical.
    """

    def __init__(self, fraction=0.01, mi_bins=10, k_clusters=5, m_chunks=160,
                 cutoff_hz=None, neighborhood=None, threshold_factor=0.5,
                 hidden=32, attn_dim=16, conv_channels=(8, 16),
                 kernel_sizes=(5, 10), pool_width=2, cnn_out=16,
                 lr=0.001, epochs=30, batch_size=32, finetune_epochs=10,
                 grad_clip=None, threshold=0.5, seed=0):
        self.fraction = fraction
        self.mi_bins = mi_bins
        self.k_clusters = k_clusters
        self.m_chunks = m_chunks
        self.cutoff_hz = cutoff_hz
        self.neighborhood = neighborhood
        self.threshold_factor = threshold_factor
        self.hidden = hidden
        self.attn_dim = attn_dim
        self.conv_channels = conv_channels
        self.kernel_sizes = kernel_sizes
        self.pool_width = pool_width
        self.cnn_out = cnn_out
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.finetune_epochs = finetune_epochs
        self.grad_clip = grad_clip
        self.threshold = threshold
        self.seed = seed
        self.bundle_ = None

    def _extractors(self):
        peaks = PeakFeatureExtractor(
            cutoff_hz=self.cutoff_hz, neighborhood=self.neighborhood,
            threshold_factor=self.threshold_factor,
        )
        chunks = ChunkStatisticsExtractor(
            m=self.m_chunks, cutoff_hz=self.cutoff_hz,
        )
        return peaks, chunks

    def features(self, signal_set: SignalSet):
        """(chunks, freq, peaks) feature arrays for a set."""
        check_fitted(self, "selector_")
        peaks_x = self.peak_extractor_.transform(signal_set)
        chunks_x = self.chunk_extractor_.transform(signal_set)
        freq_x = self.selector_.transform(signal_set)
        return chunks_x, freq_x, peaks_x

    def fit(self, signal_set: SignalSet, y=None):
        if not signal_set.labeled:
            raise UnlabeledSetError("training requires a labeled set")
        labels = signal_set.labels_vector()
        self.peak_extractor_, self.chunk_extractor_ = self._extractors()
        self.selector_ = SpectrumBinSelector(
            fraction=self.fraction, n_bins=self.mi_bins
        ).fit(signal_set)

        peaks_x = self.peak_extractor_.transform(signal_set)
        chunks_x = self.chunk_extractor_.transform(signal_set)
        freq_x = self.selector_.transform(signal_set)

        self.cluster_ = FrequencyKMeans(
            k=self.k_clusters, seed=self.seed
        ).fit(freq_x)

        from .nn.model import ModelConfig
        model_config = ModelConfig(
            r=chunks_x.shape[1], m=chunks_x.shape[2],
            n_freq=freq_x.shape[1], n_peaks=peaks_x.shape[1],
            hidden=self.hidden, attn_dim=self.attn_dim,
            conv_channels=tuple(self.conv_channels),
            kernel_sizes=tuple(self.kernel_sizes),
            pool_width=self.pool_width, cnn_out=self.cnn_out,
        )
        base_cfg = TrainConfig(
            lr=self.lr, epochs=self.epochs, batch_size=self.batch_size,
            seed=self.seed, grad_clip=self.grad_clip,
        )
        base, history = train(chunks_x, freq_x, peaks_x, labels, base_cfg,
                              model_config=model_config)
        self.loss_history_ = history

        tune_cfg = TrainConfig(
            lr=self.lr, epochs=self.finetune_epochs,
            batch_size=self.batch_size, seed=self.seed,
            grad_clip=self.grad_clip,
        )
        self.bundle_ = fine_tune_per_cluster(
            base, self.cluster_, chunks_x, freq_x, peaks_x, labels, tune_cfg
        )
        self.bundle_.selection = self.selector_.selection_
        return self

    def predict_proba(self, signal_set: SignalSet) -> np.ndarray:
        """Cluster-routed probabilities."""
        check_fitted(self, "bundle_")
        chunks_x, freq_x, peaks_x = self.features(signal_set)
        return self.bundle_.predict_proba(chunks_x, freq_x, peaks_x)

    def base_predict_proba(self, signal_set: SignalSet) -> np.ndarray:
        """Pooled (non-routed) probabilities from the base model."""
        check_fitted(self, "bundle_")
        chunks_x, freq_x, peaks_x = self.features(signal_set)
        probs, _ = self.bundle_.base.forward_batch(chunks_x, freq_x, peaks_x)
        return probs

    def predict(self, signal_set: SignalSet) -> np.ndarray:
        return (self.predict_proba(signal_set) >= self.threshold).astype(np.int64)


def stratified_split(signal_set: SignalSet, test_fraction=0.2, seed=0):
    """Per-class random split into (train, test) SignalSets."""
    if not signal_set.labeled:
        raise UnlabeledSetError("stratified split requires labels")
    labels = signal_set.labels_vector()
    rng = np.random.default_rng(seed)
    test_idx = []
    for cls in (0, 1):
        members = np.flatnonzero(labels == cls)
        n_test = int(round(len(members) * test_fraction))
        test_idx.extend(rng.permutation(members)[:n_test])
    test_mask = np.zeros(len(signal_set), dtype=bool)
    test_mask[test_idx] = True
    train = signal_set.subset(np.flatnonzero(~test_mask))
    test = signal_set.subset(np.flatnonzero(test_mask))
    return train, test


@dataclass
class PipelineResult:
    multitask: Metrics
    base: Metrics
    artifacts_dir: Path


def run_end_to_end(train_set: SignalSet, test_set: SignalSet,
                   detector: PartialDischargeDetector | None = None,
                   outdir="artifacts") -> PipelineResult:
    """Train, fine-tune, evaluate, and write every intermediate artifact.

    Files written under ``outdir``: selection.json, mi_report.csv,
    cluster_model.json, cluster_report.csv, bundle/ (checkpoints),
    metrics.csv, loss_history.csv. Deterministic given the detector
    seed.
    """
    detector = detector or PartialDischargeDetector()
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailureError(f"cannot create {outdir}: {exc}") from exc

    detector.fit(train_set)

    save_selection(detector.selector_.selection_, outdir / "selection.json")
    mi_report(detector.selector_.selection_, outdir / "mi_report.csv")
    save_cluster_model(detector.cluster_, outdir / "cluster_model.json")
    train_freq = detector.selector_.transform(train_set)
    report = cluster_report(detector.cluster_, train_freq,
                            train_set.labels_vector())
    report.write_csv(outdir / "cluster_report.csv")
    save_bundle(detector.bundle_, outdir / "bundle")
    with open(outdir / "loss_history.csv", "w") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(detector.loss_history_):
            fh.write(f"{i},{repr(loss)}\n")

    test_labels = test_set.labels_vector()
    routed = detector.predict_proba(test_set)
    pooled = detector.base_predict_proba(test_set)
    m_routed = compute_metrics(routed, test_labels, detector.threshold)
    m_pooled = compute_metrics(pooled, test_labels, detector.threshold)
    write_metrics_csv(outdir / "metrics.csv",
                      [("base", m_pooled), ("multitask", m_routed)])
    return PipelineResult(multitask=m_routed, base=m_pooled,
                          artifacts_dir=outdir)


@dataclass
class TimingReport:
    entries: list  # (stage name, mean seconds per signal, runs)

    def mean_seconds(self, stage: str) -> float:
        for name, mean, _ in self.entries:
            if name == stage:
                return mean
        raise KeyError(stage)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("stage,mean_seconds,runs\n")
            for name, mean, runs in self.entries:
                fh.write(f"{name},{repr(mean)},{runs}\n")


def _evenly_spaced_selection(T: int, fraction=0.01) -> SpectrumSelection:
    n_total = T // 2 + 1
    n_keep = max(1, int(np.ceil(fraction * n_total)))
    bins = np.unique(np.linspace(0, n_total - 1, n_keep).astype(np.int64))
    return SpectrumSelection(
        selected_bins=bins, selected_scores=np.zeros(len(bins)),
        fraction=fraction, n_bins_total=n_total, T=T, n_bins=2,
    )


def benchmark_features(signal_set: SignalSet, repetitions=5,
                       selection: SpectrumSelection | None = None,
                       cutoff_hz=None, neighborhood=None,
                       threshold_factor=0.5, m_chunks=160) -> TimingReport:
    """Mean wall time per signal of each feature stage.

    Stages: peak_extraction (filter + local maxima + sorted-gap
    denoise), chunk_statistics, mi_selected_dft (the sparse
    projection), and full_fft as the reference. Selection fitting is
    offline and excluded; an evenly-spaced stand-in selection is used
    when the set is unlabeled and none is given.
    """
    if len(signal_set) == 0:
        raise EmptySetError("benchmark needs a non-empty set")
    if selection is None:
        if signal_set.labeled:
            from .freqfeat import select_top_coefficients
            selection = select_top_coefficients(signal_set)
        else:
            selection = _evenly_spaced_selection(signal_set.T)
    selection.projection_rows()  # precompute outside the timed region
    nb = neighborhood or default_neighborhood(signal_set.sample_rate_hz)
    rate = signal_set.sample_rate_hz

    def run_peaks(rec):
        filtered = high_pass(rec, cutoff_hz)
        thr = threshold_factor * float(np.std(filtered.samples))
        extract_peaks(filtered, nb, thr)

    def run_chunks(rec):
        chunk_statistics(rec.samples_f64(), m_chunks)

    def run_sparse(rec):
        sparse_project(rec.samples_f64(), selection)

    def run_fft(rec):
        dft_magnitudes(rec.samples_f64(), rate)

    stages = [
        ("peak_extraction", run_peaks),
        ("chunk_statistics", run_chunks),
        ("mi_selected_dft", run_sparse),
        ("full_fft", run_fft),
    ]
    n = len(signal_set)
    entries = []
    for name, fn in stages:
        for rec in signal_set.records[: min(2, n)]:
            fn(rec)  # warm up caches / lazy allocations
        start = time.perf_counter()
        for _ in range(repetitions):
            for rec in signal_set.records:
                fn(rec)
        elapsed = time.perf_counter() - start
        entries.append((name, elapsed / (repetitions * n), repetitions))
    return TimingReport(entries=entries)
