import numpy as np
import pytest

from gridpd.errors import (
    InvalidConfigError,
    LengthMismatchError,
    UnlabeledSetError,
)
from gridpd.freqfeat import (
    SpectrumBinSelector,
    SpectrumSelection,
    dft_magnitudes,
    load_selection,
    mi_report,
    mutual_information,
    quantile_bin_indices,
    save_selection,
    select_top_coefficients,
    sparse_project,
)
from gridpd.signals import SignalRecord, SignalSet


def direct_dft_magnitudes(x):
    """O(T^2) evaluation of the transform matrix product."""
    T = len(x)
    w = np.exp(-2j * np.pi / T)
    W = np.array([[w ** (k * n) for n in range(T)] for k in range(T // 2 + 1)])
    return np.abs(W @ np.asarray(x, dtype=complex))


def toy_set(X, labels=None, rate=100.0):
    n, T = X.shape
    records = [
        SignalRecord(
            id=i, group_id=i // 3, phase=i % 3,
            samples=X[i].astype(np.float32), sample_rate_hz=rate,
            label=None if labels is None else int(labels[i]),
        )
        for i in range(n)
    ]
    return SignalSet(records, T=T, sample_rate_hz=rate,
                     labeled=labels is not None)


class TestDftMagnitudes:
    def test_impulse_flat_spectrum(self):
        out = dft_magnitudes([1.0, 0.0, 0.0, 0.0])
        assert np.allclose(out.magnitudes, [1.0, 1.0, 1.0])

    def test_dc_only(self):
        out = dft_magnitudes([1.0, 1.0, 1.0, 1.0])
        assert np.allclose(out.magnitudes, [4.0, 0.0, 0.0], atol=1e-12)

    def test_matches_direct_matrix_product(self):
        rng = np.random.default_rng(0)
        for T in (4, 16, 64, 63):
            x = rng.standard_normal(T)
            got = dft_magnitudes(x).magnitudes
            want = direct_dft_magnitudes(x)
            assert np.allclose(got, want, rtol=1e-9, atol=1e-9)

    def test_bin_hz(self):
        out = dft_magnitudes(np.zeros(50) + 1.0, sample_rate_hz=200.0)
        assert out.bin_hz == pytest.approx(4.0)

    def test_parseval(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(128)
        mags = dft_magnitudes(x).magnitudes
        # double all bins except DC and nyquist (even T)
        energy = mags[0] ** 2 + mags[-1] ** 2 + 2.0 * (mags[1:-1] ** 2).sum()
        assert energy == pytest.approx(len(x) * (x ** 2).sum(), rel=1e-6)


class TestMutualInformation:
    def test_constant_feature_is_zero(self):
        labels = np.array([0, 1] * 10)
        assert mutual_information(np.ones(20), labels) == 0.0

    def test_perfect_dependence_balanced(self):
        labels = np.array([0] * 50 + [1] * 50)
        got = mutual_information(labels.astype(float), labels, n_bins=2)
        assert got == pytest.approx(np.log(2.0), abs=1e-9)

    def test_perfect_dependence_quarter_positive(self):
        labels = np.array([0] * 75 + [1] * 25)
        got = mutual_information(labels.astype(float), labels, n_bins=2)
        want = 0.25 * np.log(4.0) + 0.75 * np.log(4.0 / 3.0)
        assert got == pytest.approx(want, abs=1e-9)

    def test_degenerate_labels_return_zero(self):
        rng = np.random.default_rng(0)
        assert mutual_information(rng.standard_normal(30),
                                  np.zeros(30, dtype=int)) == 0.0

    def test_independence_is_exactly_zero(self):
        # every feature value co-occurs with both labels equally often
        feature = np.tile(np.repeat([1.0, 2.0, 3.0, 4.0], 2), 25)
        labels = np.tile([0, 1], 100)
        got = mutual_information(feature, labels, n_bins=4)
        assert got == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_and_bounded_by_entropies(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            feature = rng.standard_normal(60)
            labels = rng.integers(0, 2, size=60)
            if labels.min() == labels.max():
                continue
            mi = mutual_information(feature, labels, n_bins=6)
            bins = quantile_bin_indices(feature, 6)
            h_x = -sum(
                p * np.log(p)
                for p in np.bincount(bins) / len(bins) if p > 0
            )
            p1 = labels.mean()
            h_y = -(p1 * np.log(p1) + (1 - p1) * np.log(1 - p1))
            assert -1e-12 <= mi <= min(h_x, h_y) + 1e-9

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        feature = rng.standard_normal(80)
        labels = rng.integers(0, 2, size=80)
        base = mutual_information(feature, labels, n_bins=8)
        for transform in (np.exp, lambda v: v ** 3, lambda v: 5 * v - 2):
            assert mutual_information(transform(feature), labels, n_bins=8) \
                == pytest.approx(base, abs=1e-12)

    def test_bad_inputs(self):
        with pytest.raises(InvalidConfigError):
            mutual_information([1.0, 2.0], [0, 1], n_bins=1)
        with pytest.raises(InvalidConfigError):
            mutual_information([1.0], [0], n_bins=2)
        with pytest.raises(LengthMismatchError):
            mutual_information([1.0, 2.0, 3.0], [0, 1], n_bins=2)


class TestSelection:
    def test_fraction_one_selects_everything(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((10, 32))
        y = np.array([0, 1] * 5)
        sel = select_top_coefficients(toy_set(X, y), fraction=1.0)
        assert list(sel.selected_bins) == list(range(17))

    def test_informative_tone_bin_wins(self):
        rng = np.random.default_rng(3)
        n, T, k = 60, 64, 10
        y = np.array([0, 1] * (n // 2))
        t = np.arange(T)
        X = 0.1 * rng.standard_normal((n, T))
        X[y == 1] += 3.0 * np.sin(2 * np.pi * k * t / T)
        sel = select_top_coefficients(toy_set(X, y), fraction=0.05)
        assert sel.mi_scores.argmax() == k
        assert k in sel.selected_bins

    def test_ceiling_arithmetic(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((6, 800))  # 401 non-negative bins
        y = np.array([0, 1] * 3)
        sel = select_top_coefficients(toy_set(X, y), fraction=0.01)
        assert sel.n_bins_total == 401
        assert sel.n_selected == 5

    def test_unlabeled_rejected(self):
        X = np.zeros((4, 16)) + np.arange(16)
        with pytest.raises(UnlabeledSetError):
            select_top_coefficients(toy_set(X))

    def test_tie_break_prefers_lower_bin(self):
        # constant signals: every bin scores 0, ties broken by index
        X = np.ones((4, 40))
        y = np.array([0, 1, 0, 1])
        sel = select_top_coefficients(toy_set(X, y), fraction=0.2)
        assert list(sel.selected_bins) == [0, 1, 2, 3, 4]

    def test_json_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((8, 60))
        y = np.array([0, 1] * 4)
        sel = select_top_coefficients(toy_set(X, y), fraction=0.1)
        path = tmp_path / "sel.json"
        save_selection(sel, path)
        loaded = load_selection(path)
        assert np.array_equal(loaded.selected_bins, sel.selected_bins)
        assert np.allclose(loaded.selected_scores, sel.selected_scores)
        assert loaded.T == sel.T and loaded.fraction == sel.fraction


class TestSparseProjection:
    def test_all_bins_equals_full_fft(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((6, 32))
        y = np.array([0, 1] * 3)
        sel = select_top_coefficients(toy_set(X, y), fraction=1.0)
        x = rng.standard_normal(32)
        assert np.allclose(sparse_project(x, sel),
                           dft_magnitudes(x).magnitudes, rtol=1e-9)

    def test_matches_fft_gather_any_selection(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            T = int(rng.integers(16, 200))
            bins = np.sort(rng.choice(T // 2 + 1,
                                      size=int(rng.integers(1, 6)),
                                      replace=False))
            sel = SpectrumSelection(
                selected_bins=bins, selected_scores=np.zeros(len(bins)),
                fraction=0.1, n_bins_total=T // 2 + 1, T=T, n_bins=10,
            )
            x = rng.standard_normal(T)
            want = np.abs(np.fft.rfft(x))[bins]
            assert np.allclose(sparse_project(x, sel), want,
                               rtol=1e-9, atol=1e-12)

    def test_zero_signal(self):
        sel = SpectrumSelection(
            selected_bins=np.array([0, 3]), selected_scores=np.zeros(2),
            fraction=0.1, n_bins_total=9, T=16, n_bins=10,
        )
        assert np.allclose(sparse_project(np.zeros(16), sel), 0.0)

    def test_length_mismatch(self):
        sel = SpectrumSelection(
            selected_bins=np.array([1]), selected_scores=np.zeros(1),
            fraction=0.1, n_bins_total=9, T=16, n_bins=10,
        )
        with pytest.raises(LengthMismatchError):
            sparse_project(np.zeros(17), sel)


class TestMiReport:
    def test_rows_sorted_and_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((8, 6))  # 4 bins
        y = np.array([0, 1] * 4)
        sel = select_top_coefficients(toy_set(X, y, rate=60.0), fraction=0.5)
        path = tmp_path / "mi.csv"
        mi_report(sel, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin,hz,mi_score,selected"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 4
        scores = [float(r[2]) for r in rows]
        assert scores == sorted(scores, reverse=True)
        for r in rows:
            assert float(r[2]) == pytest.approx(
                sel.mi_scores[int(r[0])], abs=1e-12
            )

    def test_ties_ordered_by_bin(self, tmp_path):
        X = np.ones((4, 6))  # all scores identically zero
        y = np.array([0, 1, 0, 1])
        sel = select_top_coefficients(toy_set(X, y), fraction=0.5)
        path = tmp_path / "mi.csv"
        mi_report(sel, path)
        bins = [int(line.split(",")[0])
                for line in path.read_text().strip().splitlines()[1:]]
        assert bins == sorted(bins)


class TestSelectorEstimator:
    def test_fit_transform_shapes(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((12, 60))
        y = np.array([0, 1] * 6)
        signal_set = toy_set(X, y)
        selector = SpectrumBinSelector(fraction=0.1).fit(signal_set)
        out = selector.transform(signal_set)
        assert out.shape == (12, selector.selection_.n_selected)
        # compare against the stored (float32-rounded) waveforms
        full = np.abs(np.fft.rfft(signal_set.samples_matrix(), axis=1))
        assert np.allclose(out, full[:, selector.selection_.selected_bins],
                           rtol=1e-9)

    def test_get_params(self):
        params = SpectrumBinSelector(fraction=0.2, n_bins=4).get_params()
        assert params["fraction"] == 0.2
        assert params["n_bins"] == 4
