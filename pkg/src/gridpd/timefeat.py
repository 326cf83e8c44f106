"""Time-domain preprocessing and features.

High-pass filtering flattens the waveform (kills the fundamental and
other low-frequency content) so that brief discharge pulses stand out.
Peaks are then strict local maxima of the rectified filtered signal
within a +-neighborhood window, denoised by sorting amplitudes in
descending order and cutting the list at the first consecutive gap
smaller than the noise threshold. Long signals are also summarized as
an r x m matrix of per-chunk statistics for the recurrent branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import InvalidCutoffError, NotDivisibleError
from .signals import SignalRecord, SignalSet
from .validation import as_float_vector

DEFAULT_CHUNK_STATS = (
    "mean", "std", "min", "max", "median",
    "p01", "p05", "p25", "p75", "p95", "p99",
    "skewness", "kurtosis_excess", "rms", "mean_abs", "range",
    "zero_cross_rate", "outlier_rate", "mean_abs_diff",
)

PEAK_FEATURE_NAMES = (
    "count", "mean_amp", "std_amp", "max_amp", "min_amp",
    "mean_gap", "std_gap", "first_idx_frac", "last_idx_frac",
)


def default_cutoff_hz(sample_rate_hz: float) -> float:
    """10 kHz at a 40 MHz rate, scaled proportionally to other rates."""
    return sample_rate_hz / 4000.0


def default_neighborhood(sample_rate_hz: float) -> int:
    """100 samples at 40 MHz = 2.5 us, expressed in samples at any rate."""
    return max(1, int(round(2.5e-6 * sample_rate_hz)))


@dataclass
class FilteredSignal:
    samples: np.ndarray  # float64, same length as the input
    cutoff_hz: float
    sample_rate_hz: float


@dataclass
class PeakSet:
    """Kept peaks: strictly increasing indices with |filtered| amplitudes."""

    indices: np.ndarray
    amplitudes: np.ndarray
    neighborhood: int
    noise_threshold: float

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.float64)
        if len(self.indices) != len(self.amplitudes):
            raise ValueError("indices and amplitudes must align")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise ValueError("indices must be strictly increasing")

    def __len__(self):
        return len(self.indices)


@dataclass
class PeakFeatureVector:
    count: int
    mean_amp: float
    std_amp: float
    max_amp: float
    min_amp: float
    mean_gap: float
    std_gap: float
    first_idx_frac: float
    last_idx_frac: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PEAK_FEATURE_NAMES],
                        dtype=np.float64)


@dataclass
class ChunkMatrix:
    """r x m matrix: column j = the r statistics of chunk j."""

    values: np.ndarray
    r: int
    m: int
    stat_names: tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.r, self.m):
            raise ValueError(
                f"values shape {self.values.shape} != ({self.r}, {self.m})"
            )
        if self.r != len(self.stat_names):
            raise ValueError("r must equal len(stat_names)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("chunk matrix contains NaN/Inf")


def high_pass_array(x, cutoff_hz, sample_rate_hz) -> np.ndarray:
    """First-order recursive high-pass.

    y[n] = alpha * (y[n-1] + x[n] - x[n-1]) with
    alpha = 1 / (1 + 2*pi*cutoff/sample_rate) and y[0] = 0.
    """
    if not 0.0 < cutoff_hz < sample_rate_hz / 2.0:
        raise InvalidCutoffError(
            f"cutoff {cutoff_hz} Hz must be in (0, {sample_rate_hz / 2})"
        )
    x = as_float_vector(x, "signal")
    if len(x) == 0:
        return x
    alpha = 1.0 / (1.0 + 2.0 * np.pi * cutoff_hz / sample_rate_hz)
    # identical difference equation as an IIR filter, y[0] forced to 0
    b = [alpha, -alpha]
    a = [1.0, -alpha]
    y, _ = lfilter(b, a, x, zi=np.array([-alpha * x[0]]))
    return y


def high_pass(signal: SignalRecord, cutoff_hz: float | None = None) -> FilteredSignal:
    """Filter one record; cutoff defaults to the rate-scaled 10 kHz rule."""
    if cutoff_hz is None:
        cutoff_hz = default_cutoff_hz(signal.sample_rate_hz)
    y = high_pass_array(signal.samples_f64(), cutoff_hz, signal.sample_rate_hz)
    return FilteredSignal(samples=y, cutoff_hz=cutoff_hz,
                          sample_rate_hz=signal.sample_rate_hz)


def _window_strict_maxima(a: np.ndarray, neighborhood: int) -> np.ndarray:
    """Indices i with a[i] > a[j] for every j != i within +-neighborhood."""
    size = 2 * neighborhood + 1
    wmax = maximum_filter1d(a, size=size, mode="constant", cval=-np.inf)
    candidates = np.flatnonzero(a == wmax)
    out = []
    n = len(a)
    for i in candidates:
        lo = max(0, i - neighborhood)
        hi = min(n, i + neighborhood + 1)
        # strictness: the window max value must occur exactly once
        if np.count_nonzero(a[lo:hi] == a[i]) == 1:
            out.append(i)
    return np.asarray(out, dtype=np.int64)


def extract_peaks(filtered: FilteredSignal, neighborhood: int,
                  noise_threshold: float) -> PeakSet:
    """Denoised peaks of the rectified filtered signal.

    All strict local maxima of |samples| within +-neighborhood are
    collected, their amplitudes sorted descending, and the sorted list
    truncated at the first consecutive difference below
    ``noise_threshold``; survivors are returned in index order. The
    amplitudes at and after the small gap are treated as the noise
    floor, so a run of near-equal values keeps nothing.
    """
    if neighborhood < 1:
        raise ValueError("neighborhood must be >= 1")
    if noise_threshold < 0:
        raise ValueError("noise_threshold must be >= 0")
    a = np.abs(np.asarray(filtered.samples, dtype=np.float64))
    idx = _window_strict_maxima(a, neighborhood)
    if len(idx) == 0:
        return PeakSet(np.array([], dtype=np.int64), np.array([]),
                       neighborhood, noise_threshold)
    amps = a[idx]
    order = np.argsort(-amps, kind="stable")
    sorted_amps = amps[order]
    keep = 0
    while keep < len(sorted_amps):
        if keep == len(sorted_amps) - 1:
            keep += 1
            break
        if sorted_amps[keep] - sorted_amps[keep + 1] < noise_threshold:
            break
        keep += 1
    kept = order[:keep]
    kept_idx = np.sort(idx[kept])
    return PeakSet(kept_idx, a[kept_idx], neighborhood, noise_threshold)


def peak_features(peaks: PeakSet, T: int) -> PeakFeatureVector:
    """Summary statistics of a PeakSet; all-zero when there are no peaks."""
    n = len(peaks)
    if n == 0:
        return PeakFeatureVector(0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    amps = peaks.amplitudes
    gaps = np.diff(peaks.indices).astype(np.float64)
    mean_gap = float(gaps.mean()) if len(gaps) else 0.0
    std_gap = float(gaps.std()) if len(gaps) else 0.0
    return PeakFeatureVector(
        count=n,
        mean_amp=float(amps.mean()),
        std_amp=float(amps.std()),
        max_amp=float(amps.max()),
        min_amp=float(amps.min()),
        mean_gap=mean_gap,
        std_gap=std_gap,
        first_idx_frac=float(peaks.indices[0]) / T,
        last_idx_frac=float(peaks.indices[-1]) / T,
    )


def _safe_moment_ratio(num, den, power):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den ** power
    return np.where(den > 0, out, 0.0)


def chunk_statistics(signal, m: int, stats=None) -> ChunkMatrix:
    """Per-chunk statistics matrix of a signal split into m equal chunks.

    ``stats`` selects (and orders) statistic names from
    DEFAULT_CHUNK_STATS; the default is all 19.
    """
    x = as_float_vector(signal, "signal")
    T = len(x)
    if m < 1 or T % m != 0:
        raise NotDivisibleError(f"m={m} must divide T={T}")
    names = tuple(stats) if stats is not None else DEFAULT_CHUNK_STATS
    unknown = set(names) - set(DEFAULT_CHUNK_STATS)
    if unknown:
        raise ValueError(f"unknown statistics: {sorted(unknown)}")
    l = T // m
    chunks = x.reshape(m, l)

    mean = chunks.mean(axis=1)
    centered = chunks - mean[:, None]
    c2 = centered * centered  # plain multiplies: ~10x faster than **3/**4
    m2 = c2.mean(axis=1)
    std = np.sqrt(m2)
    values = {}
    values["mean"] = mean
    values["std"] = std
    values["min"] = chunks.min(axis=1)
    values["max"] = chunks.max(axis=1)
    pct = np.percentile(chunks, (50, 1, 5, 25, 75, 95, 99), axis=1)
    for row, name in enumerate(("median", "p01", "p05", "p25",
                                "p75", "p95", "p99")):
        values[name] = pct[row]
    m3 = (c2 * centered).mean(axis=1)
    m4 = (c2 * c2).mean(axis=1)
    values["skewness"] = _safe_moment_ratio(m3, m2, 1.5)
    values["kurtosis_excess"] = np.where(
        m2 > 0, _safe_moment_ratio(m4, m2, 2.0) - 3.0, 0.0
    )
    values["rms"] = np.sqrt((chunks * chunks).mean(axis=1))
    values["mean_abs"] = np.abs(chunks).mean(axis=1)
    values["range"] = values["max"] - values["min"]
    if l > 1:
        crossings = np.count_nonzero(chunks[:, :-1] * chunks[:, 1:] < 0, axis=1)
        abs_diff = np.abs(np.diff(chunks, axis=1)).sum(axis=1)
    else:
        crossings = np.zeros(m)
        abs_diff = np.zeros(m)
    values["zero_cross_rate"] = crossings / l
    values["outlier_rate"] = (
        np.count_nonzero(np.abs(chunks) > 2.0 * std[:, None], axis=1) / l
    )
    values["mean_abs_diff"] = abs_diff / l

    matrix = np.stack([values[name] for name in names])
    return ChunkMatrix(values=matrix, r=len(names), m=m, stat_names=names)


class PeakFeatureExtractor(BaseEstimator, TransformerMixin):
    """SignalSet -> (n, 9) peak-feature matrix.

    Stateless; fit() only exists so the extractor slots into pipelines.
    cutoff_hz / neighborhood default to the rate-scaled rules and the
    noise threshold is ``threshold_factor * std`` of each filtered
    signal.
    """

    def __init__(self, cutoff_hz=None, neighborhood=None, threshold_factor=0.5):
        self.cutoff_hz = cutoff_hz
        self.neighborhood = neighborhood
        self.threshold_factor = threshold_factor

    def fit(self, signal_set: SignalSet, y=None):
        return self

    def transform(self, signal_set: SignalSet) -> np.ndarray:
        rows = []
        for rec in signal_set.records:
            filtered = high_pass(rec, self.cutoff_hz)
            nb = self.neighborhood or default_neighborhood(rec.sample_rate_hz)
            thr = self.threshold_factor * float(np.std(filtered.samples))
            peaks = extract_peaks(filtered, nb, thr)
            rows.append(peak_features(peaks, rec.T).as_array())
        return np.array(rows).reshape(len(signal_set), len(PEAK_FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(PEAK_FEATURE_NAMES, dtype=object)


class ChunkStatisticsExtractor(BaseEstimator, TransformerMixin):
    """SignalSet -> (n, r, m) stack of chunk-statistics matrices.

    Statistics are computed on the high-pass-filtered waveform by
    default (apply_high_pass=False to use the raw one).
    """

    def __init__(self, m=160, stats=None, apply_high_pass=True, cutoff_hz=None):
        self.m = m
        self.stats = stats
        self.apply_high_pass = apply_high_pass
        self.cutoff_hz = cutoff_hz

    def fit(self, signal_set: SignalSet, y=None):
        return self

    def transform(self, signal_set: SignalSet) -> np.ndarray:
        mats = []
        for rec in signal_set.records:
            if self.apply_high_pass:
                x = high_pass(rec, self.cutoff_hz).samples
            else:
                x = rec.samples_f64()
            mats.append(chunk_statistics(x, self.m, self.stats).values)
        names = tuple(self.stats) if self.stats is not None else DEFAULT_CHUNK_STATS
        return np.array(mats).reshape(len(signal_set), len(names), self.m)


def write_peak_features_csv(path, ids, matrix, labels=None) -> None:
    """One signal per row: id[,label],<peak feature names>."""
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        cols = ["id"] + (["label"] if labels is not None else [])
        fh.write(",".join(cols + list(PEAK_FEATURE_NAMES)) + "\n")
        for i, sig_id in enumerate(ids):
            row = [str(sig_id)]
            if labels is not None:
                row.append(str(int(labels[i])))
            row += [repr(float(v)) for v in matrix[i]]
            fh.write(",".join(row) + "\n")


def write_chunk_features_csv(path, ids, chunk_stack, stat_names,
                             labels=None) -> None:
    """One signal per row, columns ``<stat>_c<j>`` in chunk-major order."""
    chunk_stack = np.asarray(chunk_stack, dtype=np.float64)
    n, r, m = chunk_stack.shape
    header = ["id"] + (["label"] if labels is not None else [])
    header += [f"{name}_c{j}" for j in range(m) for name in stat_names]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i, sig_id in enumerate(ids):
            row = [str(sig_id)]
            if labels is not None:
                row.append(str(int(labels[i])))
            row += [repr(float(v)) for v in chunk_stack[i].T.ravel()]
            fh.write(",".join(row) + "\n")
