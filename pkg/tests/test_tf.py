"""Transform engine tests: windows, STFT, SST, ridge DP, reconstruction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import tftetris as tk
from tftetris.errors import ConfigError

FS = 50.0
TWO_PI = 2.0 * np.pi


def tone(f, duration, fs=FS, amp=1.0, phase=0.0):
    t = np.arange(int(duration * fs)) / fs
    return tk.SampledSignal(amp * np.cos(TWO_PI * f * t + phase), fs)


def interior(sig, margin_s):
    n = len(sig)
    m = int(margin_s * sig.fs)
    return slice(m, n - m)


class TestGaussianWindow:
    def test_sigma_from_span(self):
        assert tk.gaussian_window(12.0, FS).sigma == pytest.approx(1.0)

    def test_tap_count_and_symmetry(self):
        w = tk.gaussian_window(10.0, FS)
        assert len(w.taps) == 501
        np.testing.assert_allclose(w.taps, w.taps[::-1], atol=1e-15)
        assert np.argmax(w.taps) == 250

    def test_unit_norm(self):
        w = tk.gaussian_window(10.0, FS)
        assert abs(np.linalg.norm(w.taps) - 1.0) <= 1e-12

    def test_analytic_transform_matches_dtft(self):
        # truncation at 6 sigma keeps the transform within 1e-8 of the peak
        w = tk.gaussian_window(10.0, FS)
        for eta in (0.0, 0.2, 0.5, 1.0):
            dtft = np.sum(w.taps * np.exp(-1j * TWO_PI * eta * w.times)) / FS
            assert abs(dtft - w.ft(eta)) <= 1e-8 * w.ft(0.0)

    def test_too_short_rejected(self):
        with pytest.raises(ConfigError):
            tk.gaussian_window(0.1, FS)
        with pytest.raises(ConfigError):
            tk.gaussian_window(-1.0, FS)


class TestStft:
    def test_pure_tone_peak_location_and_height(self):
        f = 1.3
        sig = tone(f, 60.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        V = tk.stft(sig, w, axis)
        mag = np.abs(V.values)[:, interior(sig, 5.0)]
        peak_freqs = axis[mag.argmax(axis=0)]
        assert np.max(np.abs(peak_freqs - f)) <= V.df
        peak = np.median(mag.max(axis=0))
        assert peak == pytest.approx(w.ft(0.0) / 2, rel=0.02)

    def test_zero_signal(self):
        sig = tk.SampledSignal(np.zeros(2000), FS)
        w = tk.gaussian_window(10.0, FS)
        V = tk.stft(sig, w, tk.default_freq_axis(w, FS, 0.5, 3.0))
        assert np.all(V.values == 0)

    def test_linearity(self):
        w = tk.gaussian_window(8.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        x = tone(1.3, 30.0)
        y = tone(0.9, 30.0, phase=1.0)
        a, b = 2.3, -0.7
        combined = tk.SampledSignal(a * x.samples + b * y.samples, FS)
        lhs = tk.stft(combined, w, axis).values
        rhs = a * tk.stft(x, w, axis).values + b * tk.stft(y, w, axis).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))

    def test_modulus_invariance_under_constant_rotation(self):
        w = tk.gaussian_window(8.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        x = tone(1.3, 30.0)
        rotated = tk.SampledSignal(x.samples * np.exp(1j * 0.77), FS)
        a = np.abs(tk.stft(x, w, axis).values)
        b = np.abs(tk.stft(rotated, w, axis).values)
        assert np.max(np.abs(a - b)) <= 1e-10 * np.max(a)

    def test_axis_beyond_nyquist_rejected(self):
        w = tk.gaussian_window(8.0, FS)
        sig = tone(1.3, 20.0)
        with pytest.raises(ConfigError):
            tk.stft(sig, w, np.array([10.0, 20.0, 30.0]))

    def test_toy_three_ridge_ratios(self):
        # two-sideband toy: amplitudes (1, 0.1, 0.1) around a wandering carrier
        fs = 25.0
        n = int(90 * fs)
        phi1 = tk.slow_phase(1.3, 0.03, 12.0, n, fs, seed=5)
        phi2 = tk.slow_phase(0.3, 0.02, 12.0, n, fs, seed=6)
        g = (1 + 0.2 * np.cos(TWO_PI * phi2.phase)) * np.cos(TWO_PI * phi1.phase)
        sig = tk.SampledSignal(g, fs)
        w = tk.gaussian_window(28.0, fs)
        axis = tk.default_freq_axis(w, fs, 0.5, 2.5)
        mag = np.abs(tk.stft(sig, w, axis).values)
        inner = interior(sig, 14.0)
        df = axis[1] - axis[0]
        meds = {}
        for name, curve in (
            ("main", phi1.derivative),
            ("up", phi1.derivative + phi2.derivative),
            ("dn", phi1.derivative - phi2.derivative),
        ):
            idx = np.round((curve - axis[0]) / df).astype(int)
            local = np.stack(
                [mag[np.clip(idx + o, 0, len(axis) - 1), np.arange(n)] for o in range(-2, 3)]
            ).max(axis=0)
            meds[name] = np.median(local[inner])
        assert meds["main"] / meds["up"] == pytest.approx(10.0, rel=0.15)
        assert meds["main"] / meds["dn"] == pytest.approx(10.0, rel=0.15)


class TestSst:
    def test_pure_tone_concentration(self):
        f = 1.3
        sig = tone(f, 60.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis)
        mag = np.abs(S.values)[:, interior(sig, 5.0)]
        near = np.abs(axis - f) <= 2 * S.df
        assert mag[near].sum() >= 0.95 * mag.sum()

    def test_gamma_above_peak_zeroes_everything(self):
        sig = tone(1.3, 30.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis, gamma=1e6)
        assert np.all(S.values == 0)

    def test_chirp_tracking(self):
        fs = FS
        n = int(60 * fs)
        t = np.arange(n) / fs
        phase = 1.0 * t + 0.5 * 0.02 * t**2
        sig = tk.SampledSignal(np.cos(TWO_PI * phase), fs)
        w = tk.gaussian_window(10.0, fs)
        axis = tk.default_freq_axis(w, fs, 0.4, 3.2)
        S = tk.sst(sig, w, axis)
        ridge = tk.extract_ridge(S.values, axis, (0.5, 2.6), 100.0)
        truth = 1.0 + 0.02 * t
        inner = interior(sig, 5.0)
        assert np.max(np.abs(ridge.freqs[inner] - truth[inner])) <= 2 * S.df

    def test_rearrangement_conserves_frame_mass(self):
        # squeezing only regroups the retained STFT coefficients, so the
        # per-frame complex sum must match the thresholded STFT's sum
        sig = tone(1.3, 40.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        V = tk.stft(sig, w, axis)
        gamma = 1e-4 * np.median(np.abs(V.values).max(axis=0))
        S = tk.sst(sig, w, axis, gamma=gamma)
        kept = np.where(np.abs(V.values) > gamma, V.values, 0)
        lhs = S.values.sum(axis=0)
        rhs = kept.sum(axis=0)
        assert np.max(np.abs(lhs - rhs)) <= 1e-6 * np.max(np.abs(rhs))


class TestRidge:
    def test_constant_tone_ridge(self):
        sig = tone(1.3, 40.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis)
        ridge = tk.extract_ridge(S.values, axis, (0.5, 3.0), 100.0)
        inner = interior(sig, 5.0)
        assert np.max(np.abs(ridge.freqs[inner] - 1.3)) <= S.df

    def test_reference_pulls_to_weaker_tone(self):
        t = np.arange(int(40 * FS)) / FS
        x = np.cos(TWO_PI * 1.0 * t) + 0.4 * np.cos(TWO_PI * 1.8 * t)
        sig = tk.SampledSignal(x, FS)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        mag = np.abs(tk.stft(sig, w, axis).values)
        free = tk.extract_ridge(mag, axis, (0.5, 3.0), 0.0)
        assert np.median(free.freqs) == pytest.approx(1.0, abs=0.05)
        ref = np.full(mag.shape[1], 1.8)
        pulled = tk.extract_ridge(mag, axis, (0.5, 3.0), 0.0, reference=ref, ref_weight=1e4)
        assert np.median(pulled.freqs) == pytest.approx(1.8, abs=0.05)

    def test_zero_penalties_is_framewise_argmax(self):
        rng = np.random.default_rng(3)
        mag = rng.random((40, 60))
        axis = np.linspace(0.5, 2.5, 40)
        ridge = tk.extract_ridge(mag, axis, (0.5, 2.5), 0.0)
        np.testing.assert_allclose(ridge.freqs, axis[mag.argmax(axis=0)])

    def test_empty_band_rejected(self):
        mag = np.ones((10, 5))
        axis = np.linspace(1.0, 2.0, 10)
        with pytest.raises(ConfigError):
            tk.extract_ridge(mag, axis, (5.0, 6.0), 1.0)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(2, 5),
        st.integers(2, 5),
        st.floats(0.0, 5.0),
        st.integers(0, 2**32 - 1),
    )
    def test_dp_matches_enumeration_small(self, n_bins, n_frames, lam, seed):
        rng = np.random.default_rng(seed)
        mag = rng.random((n_bins, n_frames)) ** 2
        axis = np.linspace(1.0, 2.0, n_bins)
        ridge = tk.extract_ridge(mag, axis, (1.0, 2.0), lam)
        node = np.log(mag + 1e-12)
        best = -np.inf
        for flat in range(n_bins**n_frames):
            path, v = [], flat
            for _ in range(n_frames):
                path.append(v % n_bins)
                v //= n_bins
            score = node[path[0], 0]
            for i in range(1, n_frames):
                score += node[path[i], i] - lam * (axis[path[i]] - axis[path[i - 1]]) ** 2
            best = max(best, score)
        assert ridge.score == pytest.approx(best, abs=1e-9)


class TestReconstruction:
    def test_unit_tone_amplitude_and_rate(self):
        f = 1.3
        sig = tone(f, 60.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis)
        ridge = tk.extract_ridge(S.values, axis, (0.8, 2.0), 100.0)
        mode = tk.reconstruct_mode(S, ridge, 0.2)
        am, phase = tk.am_phase(mode)
        inner = interior(sig, 6.0)
        assert np.median(am[inner]) == pytest.approx(1.0, rel=0.02)
        assert np.max(np.abs(phase.derivative[inner] - f)) <= 0.01 * f

    def test_am_ramp_recovery(self):
        n = int(70 * FS)
        t = np.arange(n) / FS
        am_true = 1.0 + 0.3 * t / 70.0
        phi = tk.slow_phase(1.3, 0.05, 10.0, n, FS, seed=8)
        sig = tk.SampledSignal(am_true * np.cos(TWO_PI * phi.phase), FS)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis)
        ridge = tk.extract_ridge(S.values, axis, (0.8, 2.0), 100.0)
        am, _ = tk.am_phase(tk.reconstruct_mode(S, ridge, 0.2))
        inner = slice(int(0.1 * n), int(0.9 * n))
        rel_rmse = np.sqrt(np.mean((am[inner] - am_true[inner]) ** 2)) / np.sqrt(
            np.mean(am_true[inner] ** 2)
        )
        assert rel_rmse <= 0.03

    def test_phase_roundtrip(self):
        n = int(70 * FS)
        phi = tk.slow_phase(1.3, 0.05, 10.0, n, FS, seed=8)
        sig = tk.SampledSignal(np.cos(TWO_PI * phi.phase), FS)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis)
        ridge = tk.extract_ridge(S.values, axis, (0.8, 2.0), 100.0)
        _, est = tk.am_phase(tk.reconstruct_mode(S, ridge, 0.2))
        inner = slice(int(0.1 * n), int(0.9 * n))
        resid = est.phase - phi.phase
        resid -= np.median(resid[inner])
        assert np.max(np.abs(resid[inner])) <= 0.02

    def test_zero_tfr_gives_zero_mode(self):
        sig = tone(1.3, 30.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 0.5, 3.0)
        S = tk.sst(sig, w, axis, gamma=1e6)
        ridge = tk.Ridge(freqs=np.full(len(sig), 1.3), band=(0.5, 3.0), score=0.0,
                         confidence=np.zeros(len(sig)))
        mode = tk.reconstruct_mode(S, ridge, 0.2)
        assert np.all(mode.samples == 0)

    def test_edge_clipping_warns(self):
        sig = tone(1.3, 30.0)
        w = tk.gaussian_window(10.0, FS)
        axis = tk.default_freq_axis(w, FS, 1.0, 1.6)
        S = tk.sst(sig, w, axis)
        ridge = tk.Ridge(freqs=np.full(len(sig), 1.3), band=(1.0, 1.6), score=0.0,
                         confidence=np.ones(len(sig)))
        with pytest.warns(UserWarning):
            tk.reconstruct_mode(S, ridge, 0.5)
