import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdresid import (FilterSpec, RationalTransferFunction, ResidualSeries, Spectrum, ValidationError,
                     analytic_disturbance_spectrum, design_butterworth, estimate_spectrum, optimal_frequency,
                     perf_index_freq, perf_index_time, band_limited_indices)
from fdresid.spectra import DegenerateInputError, band_integral, default_grid, write_spectrum_csv

GRID = default_grid()


def const(c, grid=GRID):
    return Spectrum(grid, np.full_like(grid, float(c)))


def resonant(omega, r=0.95):
    return RationalTransferFunction([1.0], [1.0, -2 * r * np.cos(omega), r * r])


class TestAnalytic:
    def test_flat_for_unit_model(self):
        s = analytic_disturbance_spectrum(RationalTransferFunction.unit(), 0.3)
        np.testing.assert_allclose(s.values, 0.3)
        assert s.power() == pytest.approx(0.3, rel=1e-12)

    def test_low_frequency_emphasis(self, tfs, kalman):
        s = analytic_disturbance_spectrum(tfs[1], kalman.lam)
        assert s.values[0] > s.values[-1]

    @pytest.mark.parametrize("which, N", [("plant", 2 ** 20), ("mild", 2 ** 17)])
    def test_parseval_against_simulation(self, tfs, kalman, which, N):
        # the plant noise model resonates near DC (pole radius 0.983), so its sample
        # variance has ~3 % spread at 2^17; a longer record keeps the 5 % check meaningful
        H = tfs[1] if which == "plant" else RationalTransferFunction([1.0, 0.4], [1.0, -0.6])
        lam = kalman.lam[0, 0]
        s = analytic_disturbance_spectrum(H, lam, default_grid(2 ** 16))
        e = np.random.default_rng(12).normal(0, np.sqrt(lam), N + 5000)
        v = H.filter(e)[5000:]
        assert np.var(v) == pytest.approx(s.power(), rel=0.05)


class TestEstimate:
    def test_white_noise(self):
        est = estimate_spectrum(np.random.default_rng(0).standard_normal(2 ** 17))
        assert 0.9 <= est.values.mean() <= 1.1

    def test_sine_power(self):
        a, w0 = 2.0, 0.7
        x = a * np.sin(w0 * np.arange(2 ** 16))
        est = estimate_spectrum(x)
        assert est.power() == pytest.approx(a * a / 2, rel=0.10)
        assert abs(est.grid[np.argmax(est.values)] - w0) < 2 * np.pi / 4096
        # mass concentrated near w0
        near = band_integral(est.grid, est.values, w0 - 0.01, w0 + 0.01) / np.pi
        assert near > 0.95 * est.power()

    def test_zero_signal(self):
        assert not np.any(estimate_spectrum(np.zeros(2048)).values)

    def test_short_signal(self):
        with pytest.raises(ValidationError):
            estimate_spectrum(np.ones(1000))

    def test_matches_analytic(self, tfs, kalman):
        H, lam = tfs[1], kalman.lam[0, 0]
        e = np.random.default_rng(4).normal(0, np.sqrt(lam), 2 ** 18)
        est = estimate_spectrum(H.filter(e)[5000:], nperseg=4096)
        ref = analytic_disturbance_spectrum(H, lam)
        assert est.power() == pytest.approx(ref.power(), rel=0.1)


class TestIndex:
    def test_time_identity_and_scaling(self):
        r = np.random.default_rng(0).standard_normal(1000)
        assert perf_index_time(r, r) == 1.0
        assert perf_index_time(2 * r, r) == pytest.approx(4.0, rel=1e-14)

    def test_time_uses_steady_part(self):
        v = np.ones(500)
        v[:200] = 100.0
        r = ResidualSeries(v, "OE")
        assert perf_index_time(r, ResidualSeries(np.ones(500), "OE")) == 1.0

    def test_time_degenerate(self):
        with pytest.raises(DegenerateInputError):
            perf_index_time(np.ones(10), np.zeros(10))

    def test_freq_examples(self):
        d = analytic_disturbance_spectrum(resonant(1.0, 0.5), 1.0)
        assert perf_index_freq(const(0), d) == 1.0
        assert perf_index_freq(d, d) == pytest.approx(2.0, rel=1e-14)
        assert perf_index_freq(d.scaled(3.0), d) == pytest.approx(4.0, rel=1e-14)

    def test_freq_degenerate_and_grid_mismatch(self):
        with pytest.raises(DegenerateInputError):
            perf_index_freq(const(1), const(0))
        with pytest.raises(ValidationError):
            perf_index_freq(const(1), const(1, default_grid(100)))


class TestOptimalFrequency:
    def test_constant_ratio_ties_to_zero(self):
        d = analytic_disturbance_spectrum(resonant(1.0, 0.5), 1.0)
        w0, j = optimal_frequency(d.scaled(2.5), d)
        assert w0 == 0.0
        assert j == pytest.approx(3.5, rel=1e-12)

    def test_peaked(self):
        f = analytic_disturbance_spectrum(resonant(0.4, 0.99), 1.0)
        w0, _ = optimal_frequency(f, const(1))
        assert w0 == pytest.approx(0.4, abs=2 * np.pi / 4095)

    def test_zero_disturbance_rejected(self):
        with pytest.raises(ValidationError):
            optimal_frequency(const(1), const(0))

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.1, 3.0), st.floats(-0.9, 0.9))
    def test_weighting_invariance(self, r, om, zero):
        f = analytic_disturbance_spectrum(resonant(om, r), 1.0)
        d = analytic_disturbance_spectrum(resonant(0.2, 0.5), 1.0)
        w = np.abs(RationalTransferFunction([1.0, zero], [1.0])(GRID)) ** 2
        a = optimal_frequency(f, d)
        b = optimal_frequency(f.scaled(w), d.scaled(w))
        assert a[0] == pytest.approx(b[0], abs=1e-10)
        assert a[1] == pytest.approx(b[1], rel=1e-10)

    @pytest.mark.parametrize("spec", [FilterSpec("lowpass", 2, 0.1), FilterSpec("lowpass", 4, 0.5),
                                      FilterSpec("bandpass", 2, low=0.3, high=0.5),
                                      FilterSpec("bandpass", 3, low=0.395, high=0.405)])
    def test_dominance(self, spec):
        f = analytic_disturbance_spectrum(resonant(0.4), 1.0)
        d = analytic_disturbance_spectrum(resonant(0.1, 0.8), 0.5)
        _, j_opt = optimal_frequency(f, d)
        Q = design_butterworth(spec).tf
        assert perf_index_freq(f.filtered(Q), d.filtered(Q)) <= j_opt * (1 + 1e-6)

    def test_monotone_band_approach(self):
        f = analytic_disturbance_spectrum(resonant(0.4), 1.0)
        d = analytic_disturbance_spectrum(resonant(0.1, 0.8), 0.5)
        w0, j_opt = optimal_frequency(f, d)
        gaps = []
        for width in (0.2, 0.1, 0.05, 0.01):
            Q = design_butterworth(FilterSpec("bandpass", 2, low=w0 - width / 2, high=w0 + width / 2)).tf
            gaps.append(abs(perf_index_freq(f.filtered(Q), d.filtered(Q)) - j_opt))
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))


class TestBandLimited:
    def test_unit_noise_model(self):
        f = Spectrum(GRID, 1 / (1.01 - np.cos(GRID)) ** 2)
        v = Spectrum(GRID, 1 / (1.01 - np.cos(GRID)))
        j_oef, j_pef = band_limited_indices(f, v, RationalTransferFunction.unit(), 0.3)
        assert j_oef == j_pef

    @pytest.mark.parametrize("edge", [0.02, 0.5, np.pi])
    def test_ordering(self, tfs, edge):
        f = Spectrum(GRID, 1 / (1.01 - np.cos(GRID)) ** 2)
        v = Spectrum(GRID, 1 / (1.01 - np.cos(GRID)))
        j_oef, j_pef = band_limited_indices(f, v, tfs[1], edge)
        assert j_oef > j_pef

    def test_edge_validation(self, tfs):
        with pytest.raises(ValidationError):
            band_limited_indices(const(1), const(1), tfs[1], 0.0)

    def test_band_integral_partial_cells(self):
        g = np.linspace(0, 1, 11)
        assert band_integral(g, 2 * g, 0.05, 0.55) == pytest.approx(0.55 ** 2 - 0.05 ** 2, rel=1e-12)


def test_spectrum_csv(tmp_path):
    write_spectrum_csv({"a": const(1, default_grid(3)), "b": const(2, default_grid(3))}, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "omega,a,b" and lines[3].endswith(",1,2")
