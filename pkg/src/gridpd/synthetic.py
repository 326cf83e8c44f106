"""Labeled synthetic waveform generator.

Every signal is a fundamental sinusoid plus the configured noise
components. Positive signals additionally receive 3-20 bursts of
exponentially damped oscillations whose center frequency is drawn
uniformly from the discharge band, at random onsets. Deterministic for
a given config + seed.
"""

from __future__ import annotations

import numpy as np

from .signals import NoiseProfile, SignalRecord, SignalSet, SynthConfig

BURSTS_MIN = 3
BURSTS_MAX = 20
BURST_CYCLES = 3.0  # e-folding time of the damped envelope, in carrier cycles


def _default_band(kind: str, sample_rate_hz: float) -> tuple[float, float]:
    # fractions of the sampling rate; scale with whatever rate is in use
    if kind == "tonal":
        return (0.0125 * sample_rate_hz, 0.0375 * sample_rate_hz)
    return (0.2 * sample_rate_hz, 0.3 * sample_rate_hz)  # repetitive-pulse


def _damped_burst(rng, t_step, center_hz, amplitude):
    """One damped oscillatory pulse sampled at t_step spacing."""
    tau = BURST_CYCLES / center_hz
    n = max(4, int(round(6.0 * tau / t_step)))
    t = np.arange(n) * t_step
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return amplitude * np.exp(-t / tau) * np.sin(2.0 * np.pi * center_hz * t + phase)


def _add_noise(rng, x, profile: NoiseProfile, t, sample_rate_hz):
    if profile.amplitude == 0.0:
        return
    if profile.kind == "white":
        x += profile.amplitude * rng.standard_normal(len(x))
        return
    band = profile.band_hz or _default_band(profile.kind, sample_rate_hz)
    if profile.kind == "tonal":
        freq = rng.uniform(*band)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += profile.amplitude * np.sin(2.0 * np.pi * freq * t + phase)
        return
    # repetitive-pulse: damped pulses at a jittered fixed period
    center = rng.uniform(*band)
    period = len(x) // rng.integers(8, 25)
    start = rng.integers(0, max(1, period))
    t_step = 1.0 / sample_rate_hz
    pos = int(start)
    while pos < len(x):
        pulse = _damped_burst(rng, t_step, center, profile.amplitude)
        end = min(len(x), pos + len(pulse))
        x[pos:end] += pulse[: end - pos]
        pos += int(period * rng.uniform(0.9, 1.1)) + 1


def generate_synthetic(cfg: SynthConfig) -> SignalSet:
    """Generate a labeled SignalSet per ``cfg``; bit-stable given the seed.

    Exactly ``round(n_signals * pd_rate)`` signals are positive, chosen
    by a seeded permutation; every positive contains at least
    ``BURSTS_MIN`` injected bursts.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_signals
    n_pos = int(round(n * cfg.pd_rate))
    positive = np.zeros(n, dtype=bool)
    positive[rng.permutation(n)[:n_pos]] = True

    t = np.arange(cfg.T) / cfg.sample_rate_hz
    t_step = 1.0 / cfg.sample_rate_hz
    records = []
    for i in range(n):
        phase0 = rng.uniform(0.0, 2.0 * np.pi)
        x = cfg.fundamental_amp * np.sin(
            2.0 * np.pi * cfg.fundamental_hz * t + phase0
        )
        for profile in cfg.noise_profiles:
            _add_noise(rng, x, profile, t, cfg.sample_rate_hz)
        if positive[i]:
            n_bursts = int(rng.integers(BURSTS_MIN, BURSTS_MAX + 1))
            for _ in range(n_bursts):
                center = rng.uniform(*cfg.pd_band_hz)
                amp = rng.uniform(*cfg.burst_amp_range)
                burst = _damped_burst(rng, t_step, center, amp)
                onset = int(rng.integers(0, max(1, cfg.T - len(burst))))
                end = min(cfg.T, onset + len(burst))
                x[onset:end] += burst[: end - onset]
        records.append(
            SignalRecord(
                id=i, group_id=i // 3, phase=i % 3,
                samples=x.astype(np.float32),
                sample_rate_hz=cfg.sample_rate_hz,
                label=int(positive[i]),
            )
        )
    return SignalSet(records, T=cfg.T, sample_rate_hz=cfg.sample_rate_hz,
                     labeled=True)
