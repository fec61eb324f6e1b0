"""Band-pass filtering, epoching, and covariance estimation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scacsp import (
    BandpassSpec,
    ConfigError,
    DataError,
    RankError,
    TrialSet,
    butterworth_bandpass,
    covariances,
    extract_epochs,
    trial_covariance,
)

from helpers import random_spd


def _sos_magnitude(spec, freq):
    """Analytic magnitude response at one frequency: evaluate the cascaded
    second-order sections on the unit circle with complex arithmetic."""
    import scipy.signal

    sos = scipy.signal.butter(
        spec.order, [spec.low_hz, spec.high_hz], btype="bandpass", fs=spec.fs,
        output="sos",
    )
    z = np.exp(1j * 2 * np.pi * freq / spec.fs)
    h = 1.0 + 0.0j
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 / z + b2 / z**2) / (a0 + a1 / z + a2 / z**2)
    return abs(h)


def _steady_state_ratio(spec, freq, fs, n=5000, discard=2000):
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * freq * t)
    y = butterworth_bandpass(x, spec)
    return np.sqrt(np.mean(y[discard:] ** 2) / np.mean(x[discard:] ** 2))


class TestBandpass:
    spec = BandpassSpec(low_hz=7.0, high_hz=31.0, fs=250.0, order=5)

    def test_passband_tone(self):
        ratio = _steady_state_ratio(self.spec, 20.0, 250.0)
        assert ratio >= 0.95
        assert abs(ratio - _sos_magnitude(self.spec, 20.0)) < 0.02

    def test_stopband_tone(self):
        ratio = _steady_state_ratio(self.spec, 2.0, 250.0)
        assert ratio <= 0.1
        assert abs(ratio - _sos_magnitude(self.spec, 2.0)) < 0.02

    def test_zero_in_zero_out(self):
        y = butterworth_bandpass(np.zeros((3, 100)), self.spec)
        np.testing.assert_array_equal(y, np.zeros((3, 100)))

    def test_linearity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 400))
        y = rng.standard_normal((2, 400))
        a, b = 2.5, -1.25
        lhs = butterworth_bandpass(a * x + b * y, self.spec)
        rhs = a * butterworth_bandpass(x, self.spec) + b * butterworth_bandpass(y, self.spec)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_shape_preserved_and_causality_guard(self):
        x = np.random.default_rng(1).standard_normal((4, 64))
        assert butterworth_bandpass(x, self.spec).shape == (4, 64)
        with pytest.raises(DataError):
            butterworth_bandpass(x[:, :12], self.spec)

    def test_invalid_corners(self):
        with pytest.raises(ConfigError):
            BandpassSpec(low_hz=0.0, high_hz=31.0, fs=250.0)
        with pytest.raises(ConfigError):
            BandpassSpec(low_hz=7.0, high_hz=130.0, fs=250.0)


class TestExtractEpochs:
    def test_window_slice(self):
        data = np.arange(300, dtype=float).reshape(1, 300)
        ts = extract_epochs(data, [(0, 1)], window=(0.0, 1.0), fs=100.0)
        assert ts.n_samples == 100
        assert ts.n_trials == 1

    def test_cue_offset_protocol(self):
        # cue at t = 2 s, window 0.5..2.5 s after it slices [2.5 s, 4.5 s)
        fs = 100.0
        data = np.tile(np.arange(600, dtype=float), (2, 1))
        cue = int(2.0 * fs)
        ts = extract_epochs(data, [(cue, 1)], window=(0.5, 2.5), fs=fs)
        raw = data[:, 250:450]
        np.testing.assert_allclose(
            ts.trials[0], raw - raw.mean(axis=1, keepdims=True), atol=1e-9
        )

    def test_out_of_bounds_lists_events(self):
        data = np.zeros((1, 100))
        with pytest.raises(DataError) as err:
            extract_epochs(data, [(0, 1), (90, 1)], window=(0.0, 0.5), fs=100.0)
        assert "[1]" in str(err.value)

    def test_rows_centered(self):
        rng = np.random.default_rng(5)
        data = rng.standard_normal((3, 500)) + 7.0
        ts = extract_epochs(data, [(10, 1), (200, 1)], window=(0.0, 1.0), fs=100.0)
        for X in ts.trials:
            rel = np.abs(X.mean(axis=1)) / np.maximum(X.std(axis=1), 1e-30)
            assert np.all(rel <= 1e-12)


class TestTrialSet:
    def test_rejects_mixed_shapes_and_missing_class(self):
        with pytest.raises(DataError):
            TrialSet(trials=[np.zeros((2, 5)), np.zeros((3, 5))], labels=[1, 2],
                     fs=100.0, class_count=2)
        with pytest.raises(DataError):
            TrialSet(trials=[np.ones((2, 5)), np.ones((2, 5))], labels=[1, 1],
                     fs=100.0, class_count=2)

    def test_subset_preserves_metadata(self):
        rng = np.random.default_rng(6)
        ts = TrialSet(
            trials=[rng.standard_normal((2, 8)) for _ in range(4)],
            labels=[1, 2, 1, 2],
            fs=128.0,
            class_count=2,
        )
        sub = ts.subset([0, 3])
        assert sub.n_trials == 2 and sub.fs == 128.0
        np.testing.assert_array_equal(sub.labels, [1, 2])


class TestCovariances:
    def _tiny_set(self, rng, n_trials=6, n_c=3, n_t=24):
        trials = [rng.standard_normal((n_c, n_t)) for _ in range(n_trials)]
        labels = [1 + i % 2 for i in range(n_trials)]
        return TrialSet(trials=trials, labels=labels, fs=100.0, class_count=2)

    def test_hand_computed_2x2(self):
        X = np.array([[1.0, -1.0], [2.0, -2.0]])  # rows already zero-mean
        C = trial_covariance(X)
        np.testing.assert_array_equal(C, [[2.0, 4.0], [4.0, 8.0]])

    def test_matches_double_loop_exactly(self):
        rng = np.random.default_rng(7)
        ts = self._tiny_set(rng, n_c=3, n_t=5)
        cov = covariances(ts)
        for i, X in enumerate(ts.trials):
            brute = np.empty((3, 3))
            for a in range(3):
                for b in range(3):
                    brute[a, b] = np.dot(X[a], X[b]) / (X.shape[1] - 1)
            brute = 0.5 * (brute + brute.T)
            np.testing.assert_array_equal(cov.per_trial[i], brute)

    def test_white_noise_recovers_scaled_identity(self):
        sigma2 = 2.0
        rng = np.random.default_rng(8)
        n_t = 20000
        X = np.sqrt(sigma2) * rng.standard_normal((3, n_t))
        C = trial_covariance(X - X.mean(axis=1, keepdims=True))
        assert np.max(np.abs(C - sigma2 * np.eye(3))) <= 5 * sigma2 / np.sqrt(n_t)

    def test_identical_classes_equal_means(self):
        rng = np.random.default_rng(9)
        X = [rng.standard_normal((3, 30)) for _ in range(3)]
        ts = TrialSet(trials=X + X, labels=[1] * 3 + [2] * 3, fs=100.0, class_count=2)
        cov = covariances(ts)
        np.testing.assert_array_equal(cov.class_means[0], cov.class_means[1])

    def test_whitening_and_sum_invariants(self):
        rng = np.random.default_rng(10)
        ts = self._tiny_set(rng, n_trials=10, n_c=4, n_t=50)
        cov = covariances(ts)
        n = cov.n_channels
        np.testing.assert_allclose(
            cov.composite, cov.class_means.sum(axis=0), atol=1e-10
        )
        np.testing.assert_allclose(
            cov.whitener.T @ cov.composite @ cov.whitener, np.eye(n), atol=1e-8
        )
        R1 = cov.whitened_per_trial[cov.labels == 1].mean(axis=0)
        R2 = cov.whitened_per_trial[cov.labels == 2].mean(axis=0)
        np.testing.assert_allclose(R1 + R2, np.eye(n), atol=1e-8)

    def test_rank_deficient_composite_raises(self):
        rng = np.random.default_rng(11)
        base = rng.standard_normal((1, 40))
        # every channel is a multiple of one source -> rank-1 covariance
        mix = np.array([[1.0], [2.0], [3.0]])
        trials = [mix @ base for _ in range(4)]
        ts = TrialSet(trials=trials, labels=[1, 2, 1, 2], fs=100.0, class_count=2)
        with pytest.raises(RankError) as err:
            covariances(ts)
        assert "trials" in str(err.value) or "channels" in str(err.value)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_symmetry_property(self, seed):
        rng = np.random.default_rng(seed)
        ts = self._tiny_set(rng)
        cov = covariances(ts)
        assert np.max(np.abs(cov.per_trial - cov.per_trial.transpose(0, 2, 1))) <= 1e-12
