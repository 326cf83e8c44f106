"""gridpd: partial-discharge detection in high-rate power-line waveforms.

Feature extraction (peaks, chunk statistics, MI-selected sparse
spectral magnitudes), unsupervised frequency clustering, and a
composite BiLSTM-attention + 1D-CNN classifier with per-cluster
multi-task fine-tuning. Estimators follow the sklearn fit/transform
convention so the pieces compose with the wider ecosystem.
"""

from .cluster import FrequencyKMeans, cluster_report, silhouette_mean, sweep_k
from .errors import GridPdError
from .freqfeat import (
    SpectrumBinSelector,
    dft_magnitudes,
    mutual_information,
    select_top_coefficients,
    sparse_project,
)
from .io import load_signal_set, save_signal_set
from .metrics import Metrics, compute_metrics, confusion
from .pipeline import (
    PartialDischargeDetector,
    benchmark_features,
    run_end_to_end,
    stratified_split,
)
from .signals import NoiseProfile, SignalRecord, SignalSet, SynthConfig
from .synthetic import generate_synthetic
from .timefeat import (
    ChunkStatisticsExtractor,
    PeakFeatureExtractor,
    chunk_statistics,
    extract_peaks,
    high_pass,
    peak_features,
)

__version__ = "0.1.0"

__all__ = [
    "GridPdError",
    "SignalRecord", "SignalSet", "SynthConfig", "NoiseProfile",
    "load_signal_set", "save_signal_set", "generate_synthetic",
    "high_pass", "extract_peaks", "peak_features", "chunk_statistics",
    "PeakFeatureExtractor", "ChunkStatisticsExtractor",
    "dft_magnitudes", "mutual_information", "select_top_coefficients",
    "sparse_project", "SpectrumBinSelector",
    "FrequencyKMeans", "silhouette_mean", "sweep_k", "cluster_report",
    "Metrics", "confusion", "compute_metrics",
    "PartialDischargeDetector", "run_end_to_end", "stratified_split",
    "benchmark_features",
    "__version__",
]
