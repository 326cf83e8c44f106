"""Signal containers: records, sets, and synthetic-generation configs.

A SignalSet is an ordered collection of fixed-length voltage waveforms.
Samples are stored as float32 (mirroring the on-disk format) and grouped
three phases to a measurement group. All pipeline math upconverts to
float64 on the way in.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfigError, LabelMissingError

NOISE_KINDS = ("white", "tonal", "repetitive-pulse")


@dataclass
class SignalRecord:
    """One fixed-length voltage waveform with phase/group metadata.

    Parameters
    ----------
    id : int
        Unique id within the set.
    group_id : int
        3-phase measurement group this record belongs to.
    phase : int
        Phase index in {0, 1, 2}.
    samples : numpy.ndarray
        Waveform, length T, float32, arbitrary linear volt scale.
    sample_rate_hz : float
        Sampling rate shared by the whole set.
    label : int or None
        1 = partial discharge, 0 = normal, None = unlabeled.
    """

    id: int
    group_id: int
    phase: int
    samples: np.ndarray
    sample_rate_hz: float
    label: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1:
            raise ValueError("samples must be 1-D")
        if self.phase not in (0, 1, 2):
            raise ValueError(f"phase must be 0, 1 or 2, got {self.phase}")
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")

    @property
    def T(self) -> int:
        return len(self.samples)

    def samples_f64(self) -> np.ndarray:
        return self.samples.astype(np.float64)


@dataclass
class SignalSet:
    """Ordered list of SignalRecords sharing T and sample rate.

    Invariants are checked at construction: uniform length, unique ids,
    at most one record per (group, phase), labels present when
    ``labeled`` is true.
    """

    records: list[SignalRecord]
    T: int
    sample_rate_hz: float
    labeled: bool

    def __post_init__(self):
        ids = set()
        group_phase = set()
        for rec in self.records:
            if rec.T != self.T:
                raise ValueError(
                    f"record {rec.id} has length {rec.T}, set declares T={self.T}"
                )
            if rec.sample_rate_hz != self.sample_rate_hz:
                raise ValueError(f"record {rec.id} has a different sample rate")
            if rec.id in ids:
                raise ValueError(f"duplicate record id {rec.id}")
            ids.add(rec.id)
            key = (rec.group_id, rec.phase)
            if key in group_phase:
                raise ValueError(f"duplicate (group, phase) {key}")
            group_phase.add(key)
            if self.labeled and rec.label is None:
                raise LabelMissingError(f"record {rec.id} is missing its label")

    def __len__(self) -> int:
        return len(self.records)

    def samples_matrix(self) -> np.ndarray:
        """All waveforms stacked as an (n, T) float64 matrix."""
        if not self.records:
            return np.zeros((0, self.T), dtype=np.float64)
        return np.stack([r.samples_f64() for r in self.records])

    def labels_vector(self) -> np.ndarray:
        """Labels as an int array; raises if the set is unlabeled."""
        if not self.labeled:
            raise LabelMissingError("signal set is unlabeled")
        return np.array([r.label for r in self.records], dtype=np.int64)

    def ids(self) -> np.ndarray:
        return np.array([r.id for r in self.records], dtype=np.int64)

    def subset(self, indices) -> "SignalSet":
        """New set holding the records at ``indices`` (order preserved)."""
        recs = [self.records[i] for i in indices]
        return SignalSet(recs, self.T, self.sample_rate_hz, self.labeled)


def concat_signal_sets(a: SignalSet, b: SignalSet) -> SignalSet:
    """Concatenate two compatible sets, renumbering ids and groups."""
    if a.T != b.T or a.sample_rate_hz != b.sample_rate_hz:
        raise ValueError("sets must share T and sample_rate_hz")
    labeled = a.labeled and b.labeled
    records = []
    for i, rec in enumerate(a.records + b.records):
        records.append(
            replace(rec, id=i, group_id=i // 3, phase=i % 3,
                    label=rec.label if labeled else None)
        )
    return SignalSet(records, a.T, a.sample_rate_hz, labeled)


@dataclass
class NoiseProfile:
    """One additive noise component of the synthetic generator.

    kind:
        "white"            - gaussian noise, std = amplitude
        "tonal"            - single sinusoid, frequency drawn per signal
                             from band_hz (discrete spectral interference)
        "repetitive-pulse" - periodic damped oscillatory pulses with
                             center frequency drawn from band_hz
    band_hz applies to the tonal and repetitive-pulse kinds; when None a
    kind-specific default scaled to the sample rate is used.
    """

    amplitude: float
    kind: str = "white"
    band_hz: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidConfigError(
                f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}"
            )
        if self.amplitude < 0:
            raise InvalidConfigError("noise amplitude must be >= 0")


@dataclass
class SynthConfig:
    """Configuration for the labeled synthetic waveform generator.

    Defaults mirror the desk-scale setup: see ``desk_default``. The
    fundamental is a plain sinusoid; positive signals additionally get
    bursts of exponentially damped oscillations whose spectral energy
    falls inside ``pd_band_hz``.
    """

    n_signals: int
    T: int = 8000
    sample_rate_hz: float = 4e6
    fundamental_hz: float = 50.0
    fundamental_amp: float = 1.0
    pd_rate: float = 0.06
    pd_band_hz: tuple[float, float] = (3e5, 4e5)
    burst_amp_range: tuple[float, float] = (0.4, 1.2)
    noise_profiles: list[NoiseProfile] = field(
        default_factory=lambda: [NoiseProfile(amplitude=0.04, kind="white")]
    )
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_signals < 0:
            raise InvalidConfigError("n_signals must be >= 0")
        if self.T < 2:
            raise InvalidConfigError("T must be >= 2")
        if self.sample_rate_hz <= 0:
            raise InvalidConfigError("sample_rate_hz must be > 0")
        if not 0.0 <= self.pd_rate <= 1.0:
            raise InvalidConfigError("pd_rate must be in [0, 1]")
        low, high = self.pd_band_hz
        if not 0 < low < high:
            raise InvalidConfigError("pd_band_hz must satisfy 0 < low < high")
        if high >= self.sample_rate_hz / 2:
            raise InvalidConfigError(
                f"pd_band high {high} must be below Nyquist "
                f"{self.sample_rate_hz / 2}"
            )
        if self.burst_amp_range[0] <= 0 or self.burst_amp_range[1] < self.burst_amp_range[0]:
            raise InvalidConfigError("burst_amp_range must be 0 < low <= high")

    @classmethod
    def desk_default(cls, n_signals: int, pd_rate: float = 0.06,
                     seed: int = 0) -> "SynthConfig":
        """Desk-scale preset: T=8000 at 4 MHz (2 ms window).

        One fundamental cycle fits the window (sample_rate/T = 500 Hz)
        and the discharge band sits at 300-400 kHz, the 40 MHz band
        scaled down by the same factor as the sampling rate.
        """
        return cls(
            n_signals=n_signals,
            T=8000,
            sample_rate_hz=4e6,
            fundamental_hz=500.0,
            pd_rate=pd_rate,
            pd_band_hz=(3e5, 4e5),
            seed=seed,
        )
