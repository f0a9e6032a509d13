import numpy as np
import pytest

from spellersec import dsp, ssvep
from spellersec.errors import ParameterError


def make_grid(freqs=None):
    if freqs is None:
        freqs = (8.0, 9.0, 10.0, 11.0)
    chars = tuple("ABCDEFGHIJKLMNOP"[: len(freqs)])
    return ssvep.FrequencyGrid(characters=chars, frequencies=tuple(freqs))


class TestFrequencyGrid:
    def test_default_layout(self):
        g = ssvep.default_grid()
        assert len(g) == 40
        assert g.frequencies[0] == 8.0
        assert abs(max(g.frequencies) - 15.8) < 1e-12
        assert len(set(g.frequencies)) == 40
        assert len(set(g.characters)) == 40

    def test_duplicate_frequency_rejected(self):
        with pytest.raises(ParameterError):
            ssvep.FrequencyGrid(characters=("A", "B"), frequencies=(8.0, 8.0))


class TestReferenceSignal:
    def test_row_construction(self):
        # row c (1-indexed): odd rows sin((c+1) pi f n / fs), even cos(c pi f n / fs)
        ref = ssvep.reference_signal(8.0, 6, 250.0, n_harmonics=2)
        assert ref.y.shape == (4, 6)
        n = np.arange(1, 7, dtype=np.float64)
        np.testing.assert_allclose(ref.y[0], np.sin(2 * np.pi * 8.0 * n / 250.0), atol=1e-12)
        np.testing.assert_allclose(ref.y[1], np.cos(2 * np.pi * 8.0 * n / 250.0), atol=1e-12)
        np.testing.assert_allclose(ref.y[2], np.sin(4 * np.pi * 8.0 * n / 250.0), atol=1e-12)
        np.testing.assert_allclose(ref.y[3], np.cos(4 * np.pi * 8.0 * n / 250.0), atol=1e-12)

    def test_nyquist_guard(self):
        with pytest.raises(ParameterError):
            ssvep.reference_signal(30.0, 100, 250.0, n_harmonics=5)  # 150 >= 125


class TestCcaRho:
    def test_range_and_symmetry_of_scale(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 100))
        y = rng.standard_normal((4, 100))
        r = ssvep.cca_rho(x, y)
        assert 0.0 <= r <= 1.0
        # per-channel affine rescaling of either side cannot change rho
        r2 = ssvep.cca_rho(5.0 * x + 1.0, y)
        assert abs(r - r2) <= 1e-9

    def test_perfect_correlation(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((2, 80))
        x = np.array([[2.0, 0.5]]) @ y  # x lies in the row space of y
        assert ssvep.cca_rho(x, y) >= 1.0 - 1e-6

    def test_random_projection_never_beats_rho(self):
        """rho is the max correlation over projections; search must not exceed it."""
        rng = np.random.default_rng(2)
        for _ in range(20):
            n_cx = int(rng.integers(1, 5))
            n_cy = int(rng.integers(1, 5))
            n_s = int(rng.integers(20, 201))
            x = rng.standard_normal((n_cx, n_s))
            y = rng.standard_normal((n_cy, n_s))
            rho = ssvep.cca_rho(x, y)
            xz = dsp.znorm_channels(x)
            yz = dsp.znorm_channels(y)
            wx = rng.standard_normal((1000, n_cx))
            wy = rng.standard_normal((1000, n_cy))
            px = wx @ xz
            py = wy @ yz
            px -= px.mean(axis=1, keepdims=True)
            py -= py.mean(axis=1, keepdims=True)
            num = np.abs(np.einsum("it,it->i", px, py))
            den = np.linalg.norm(px, axis=1) * np.linalg.norm(py, axis=1)
            best = float((num / den).max())
            assert best <= rho + 1e-6

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            ssvep.cca_rho(np.ones((2, 50)) + np.arange(50), np.ones((2, 60)) + np.arange(60))


class TestDecode:
    def test_noiseless_tone_all_frequencies(self):
        grid = ssvep.default_grid()
        fs = 250.0
        n = 312
        t = np.arange(1, n + 1) / fs
        hits = 0
        for k, f in enumerate(grid.frequencies):
            x = np.vstack([np.sin(2 * np.pi * f * t + 0.3),
                           np.cos(2 * np.pi * f * t)])
            res = ssvep.decode_frequency(x, grid, fs)
            hits += res.index == k
        assert hits == len(grid)

    def test_tie_breaks_to_lowest_frequency(self):
        grid = make_grid()
        scores = np.array([0.4, 0.7, 0.7, 0.1])
        res = ssvep._pick(grid, scores)
        assert res.frequency == 9.0

    def test_decode_result_fields(self):
        grid = make_grid()
        fs = 250.0
        t = np.arange(1, 201) / fs
        x = np.vstack([np.sin(2 * np.pi * 10.0 * t), np.cos(2 * np.pi * 10.0 * t)])
        res = ssvep.decode_frequency(x, grid, fs, n_harmonics=3)
        assert res.character == "C"
        assert res.scores.shape == (4,)
        assert res.scores[res.index] == res.scores.max()


class TestFbcca:
    def test_weights_follow_power_law(self):
        cfg = ssvep.FilterBankConfig()
        w = np.asarray(cfg.weights())
        m = np.arange(1, len(w) + 1, dtype=np.float64)
        np.testing.assert_allclose(w, m**-1.25 + 0.25, atol=1e-12)

    def test_noiseless_tone_decodes(self):
        grid = make_grid((9.0, 11.0, 13.0, 15.0))
        fs = 250.0
        t = np.arange(1, 313) / fs
        x = np.vstack([np.sin(2 * np.pi * 13.0 * t),
                       0.4 * np.sin(2 * np.pi * 26.0 * t + 0.5)])
        res = ssvep.fbcca_decode(x, grid, fs)
        assert res.frequency == 13.0


class TestVictim:
    def test_window_conventions(self):
        v = ssvep.SsvepVictim(make_grid(), 250.0)
        # floor conventions: 0.13 s start, 1.25 s length
        assert v.window_start == 32
        assert v.window_len == 312

    def test_decode_trial_extracts_window(self):
        grid = make_grid()
        fs = 250.0
        v = ssvep.SsvepVictim(grid, fs)
        rng = np.random.default_rng(3)
        n_total = int(6.0 * fs)
        onset = int(0.5 * fs)
        data = 0.05 * rng.standard_normal((3, n_total))
        t = np.arange(n_total) / fs
        stim = np.sin(2 * np.pi * 11.0 * t)
        lo = onset + v.window_start
        data[:, lo:] += stim[None, lo:]
        trial = ssvep.SsvepTrial(dsp.Signal(data, fs), onset, 3, "D", 0)
        res = ssvep.decode_trial(v, trial)
        assert res.index == 3

    def test_selection_time_includes_gaze_shift(self):
        v = ssvep.SsvepVictim(make_grid(), 250.0)
        assert abs(v.selection_time_s - 1.38) < 1e-9
