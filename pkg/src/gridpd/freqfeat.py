"""Spectral features: magnitude spectra, mutual-information bin scoring,
top-fraction bin selection, and the sensor-side sparse projection.

Selection is fit offline on labeled training data; application to new
signals is just a small matrix product against the retained rows of the
transform, cheap enough for sensor-side use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import (
    InvalidConfigError,
    IoFailureError,
    LengthMismatchError,
    UnlabeledSetError,
)
from .signals import SignalSet
from .validation import as_float_vector, as_label_vector, check_fitted

DEFAULT_FRACTION = 0.01
DEFAULT_MI_BINS = 10


@dataclass
class Spectrum:
    """Non-negative-frequency magnitude spectrum of a real signal."""

    magnitudes: np.ndarray  # length floor(T/2)+1
    bin_hz: float


@dataclass
class SpectrumSelection:
    """Retained spectral bins with their mutual-information scores.

    ``mi_scores`` covers every bin when the selection was just fitted;
    after a JSON round-trip only the selected bins' scores survive (the
    on-disk schema stores just those) and ``mi_scores`` is None.
    """

    selected_bins: np.ndarray
    selected_scores: np.ndarray
    fraction: float
    n_bins_total: int
    T: int
    n_bins: int  # MI discretization bins
    sample_rate_hz: float | None = None
    mi_scores: np.ndarray | None = None
    _rows: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.selected_bins = np.asarray(self.selected_bins, dtype=np.int64)
        self.selected_scores = np.asarray(self.selected_scores, dtype=np.float64)

    @property
    def n_selected(self) -> int:
        return len(self.selected_bins)

    def projection_rows(self):
        """Selected transform rows as (cos, sin) real matrices, cached.

        |X_k| = hypot(cos_rows @ x, sin_rows @ x); two real products are
        cheaper than one complex one at sensor time.
        """
        if self._rows is None:
            angles = (2.0 * np.pi / self.T) * np.outer(
                self.selected_bins, np.arange(self.T)
            )
            self._rows = (np.cos(angles), np.sin(angles))
        return self._rows

    def to_json_dict(self) -> dict:
        return {
            "T": int(self.T),
            "fraction": float(self.fraction),
            "n_bins": int(self.n_bins),
            "selected_bins": [int(b) for b in self.selected_bins],
            "mi_scores_selected": [float(s) for s in self.selected_scores],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpectrumSelection":
        T = int(d["T"])
        bins = np.asarray(d["selected_bins"], dtype=np.int64)
        return cls(
            selected_bins=bins,
            selected_scores=np.asarray(d["mi_scores_selected"], dtype=np.float64),
            fraction=float(d["fraction"]),
            n_bins_total=T // 2 + 1,
            T=T,
            n_bins=int(d["n_bins"]),
        )


def save_selection(sel: SpectrumSelection, path) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(sel.to_json_dict(), fh, indent=2)
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


def load_selection(path) -> SpectrumSelection:
    with open(path) as fh:
        return SpectrumSelection.from_json_dict(json.load(fh))


def dft_magnitudes(signal, sample_rate_hz: float = 1.0) -> Spectrum:
    """Magnitudes |X_k| for k = 0..floor(T/2), via FFT."""
    x = as_float_vector(signal, "signal")
    if len(x) < 2:
        raise ValueError("signal must have length >= 2")
    mags = np.abs(np.fft.rfft(x))
    return Spectrum(magnitudes=mags, bin_hz=sample_rate_hz / len(x))


def quantile_bin_indices(feature: np.ndarray, n_bins: int) -> np.ndarray:
    """Discretize by quantile edges into at most n_bins non-empty bins.

    Values equal to an edge fall in the lower bin, which keeps the
    assignment invariant under strictly monotone transformations.
    """
    edges = np.quantile(feature, np.arange(1, n_bins) / n_bins)
    edges = np.unique(edges)
    return np.searchsorted(edges, feature, side="left")


def mutual_information(feature, labels, n_bins: int = DEFAULT_MI_BINS) -> float:
    """Empirical mutual information (nats) between a quantile-binned
    feature and binary labels; zero terms are skipped.

    Returns 0.0 when all labels are equal (independence by definition).
    """
    feature = as_float_vector(feature, "feature")
    labels = as_label_vector(labels, "labels")
    if len(feature) != len(labels):
        raise LengthMismatchError(
            f"feature ({len(feature)}) and labels ({len(labels)}) differ"
        )
    if len(feature) < 2:
        raise InvalidConfigError("need at least 2 samples")
    if n_bins < 2:
        raise InvalidConfigError("n_bins must be >= 2")
    if labels.min() == labels.max():
        return 0.0
    bins = quantile_bin_indices(feature, n_bins)
    n = len(feature)
    total = 0.0
    for b in np.unique(bins):
        in_b = bins == b
        p_x = np.count_nonzero(in_b) / n
        for y in (0, 1):
            joint = np.count_nonzero(in_b & (labels == y)) / n
            if joint == 0.0:
                continue
            p_y = np.count_nonzero(labels == y) / n
            total += joint * np.log(joint / (p_x * p_y))
    return float(total)


def select_top_coefficients(signal_set: SignalSet,
                            fraction: float = DEFAULT_FRACTION,
                            n_bins: int = DEFAULT_MI_BINS) -> SpectrumSelection:
    """Score every spectral bin by MI with the labels and keep the top
    ``max(1, ceil(fraction * n_bins_total))``, ties to the lower bin."""
    if not signal_set.labeled:
        raise UnlabeledSetError("selection requires a labeled set")
    if not 0.0 < fraction <= 1.0:
        raise InvalidConfigError("fraction must be in (0, 1]")
    X = signal_set.samples_matrix()
    y = signal_set.labels_vector()
    mags = np.abs(np.fft.rfft(X, axis=1))
    n_total = mags.shape[1]
    scores = np.array([
        mutual_information(mags[:, k], y, n_bins) for k in range(n_total)
    ])
    n_keep = max(1, int(np.ceil(fraction * n_total)))
    # stable sort on (-score, bin) makes ties deterministic by lower bin
    order = np.lexsort((np.arange(n_total), -scores))
    selected = np.sort(order[:n_keep])
    return SpectrumSelection(
        selected_bins=selected,
        selected_scores=scores[selected],
        fraction=fraction,
        n_bins_total=n_total,
        T=signal_set.T,
        n_bins=n_bins,
        sample_rate_hz=signal_set.sample_rate_hz,
        mi_scores=scores,
    )


def sparse_project(signal, sel: SpectrumSelection) -> np.ndarray:
    """|X_k| at the selected bins only, computed directly (no full FFT)."""
    x = as_float_vector(signal, "signal")
    if len(x) != sel.T:
        raise LengthMismatchError(
            f"signal length {len(x)} != fitted T {sel.T}"
        )
    cos_rows, sin_rows = sel.projection_rows()
    return np.hypot(cos_rows @ x, sin_rows @ x)


def mi_report(sel: SpectrumSelection, path, sample_rate_hz=None) -> None:
    """CSV of (bin, hz, mi_score, selected) sorted by score descending,
    ties by bin index. Needs a freshly fitted selection (full scores)."""
    if sel.mi_scores is None:
        raise ValueError(
            "mi_report needs the full score vector; refit the selection"
        )
    rate = sample_rate_hz if sample_rate_hz is not None else sel.sample_rate_hz
    bin_hz = (rate / sel.T) if rate else 0.0
    n_total = len(sel.mi_scores)
    order = np.lexsort((np.arange(n_total), -sel.mi_scores))
    selected = np.zeros(n_total, dtype=bool)
    selected[sel.selected_bins] = True
    try:
        with open(path, "w") as fh:
            fh.write("bin,hz,mi_score,selected\n")
            for k in order:
                fh.write(
                    f"{k},{repr(k * bin_hz)},{repr(float(sel.mi_scores[k]))},"
                    f"{int(selected[k])}\n"
                )
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc


class SpectrumBinSelector(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit selects informative bins on (n, T) raw
    waveforms + labels, transform sparse-projects each waveform onto the
    retained bins. Composes with sklearn pipelines."""

    def __init__(self, fraction=DEFAULT_FRACTION, n_bins=DEFAULT_MI_BINS):
        self.fraction = fraction
        self.n_bins = n_bins
        self.selection_ = None

    def fit(self, signal_set: SignalSet, y=None):
        self.selection_ = select_top_coefficients(
            signal_set, self.fraction, self.n_bins
        )
        return self

    def transform(self, signal_set: SignalSet) -> np.ndarray:
        check_fitted(self, "selection_")
        sel = self.selection_
        if signal_set.T != sel.T:
            raise LengthMismatchError(
                f"set T={signal_set.T} != fitted T={sel.T}"
            )
        X = signal_set.samples_matrix()
        if len(X) == 0:
            return np.zeros((0, sel.n_selected))
        cos_rows, sin_rows = sel.projection_rows()
        return np.hypot(X @ cos_rows.T, X @ sin_rows.T)
