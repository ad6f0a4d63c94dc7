import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rrd.wavelet import (
    FILTERS,
    DensityEstimate,
    Pyramid,
    WaveletConfig,
    bin_samples,
    density_estimate,
    dwt,
    hard_threshold,
    highpass,
    idwt,
    resample_to_grid,
    threshold_value,
)

ALL_FILTERS = sorted(FILTERS)


def one_level_matrix(h, n):
    """Brute-force orthogonal matrix of a single periodic analysis step:
    rows are the low-pass taps shifted by two, then the high-pass rows.
    """
    g = highpass(h)
    rows = []
    for taps in (h, g):
        for shift in range(n // 2):
            row = np.zeros(n)
            for k, c in enumerate(taps):
                row[(2 * shift + k) % n] += c
            rows.append(row)
    return np.array(rows)


class TestFilters:
    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_lowpass_sums_to_sqrt2(self, name):
        assert abs(FILTERS[name].sum() - math.sqrt(2)) < 1e-12

    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_even_lag_orthonormality(self, name):
        h = FILTERS[name]
        assert abs(np.dot(h, h) - 1.0) < 1e-12
        for lag in range(2, len(h), 2):
            assert abs(np.dot(h[:-lag], h[lag:])) < 1e-12

    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_highpass_sums_to_zero(self, name):
        # tabulated taps carry ~5e-13 rounding, so the alternating sum is
        # zero only to that precision
        assert abs(highpass(FILTERS[name]).sum()) < 1e-11

    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_one_level_matrix_is_orthogonal(self, name):
        for n in (16, 64):
            w = one_level_matrix(FILTERS[name], n)
            np.testing.assert_allclose(w @ w.T, np.eye(n), atol=1e-12)


class TestTransform:
    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_single_level_matches_matrix_oracle(self, name):
        cfg = WaveletConfig(filter=name, bins_log2=4, max_level=1)
        rng = np.random.default_rng(1)
        x = rng.normal(size=16)
        pyr = dwt(x, cfg)
        w = one_level_matrix(FILTERS[name], 16)
        coeffs = w @ x
        np.testing.assert_allclose(pyr.approx, coeffs[:8], atol=1e-12)
        np.testing.assert_allclose(pyr.details[0], coeffs[8:], atol=1e-12)

    @pytest.mark.parametrize("name", ALL_FILTERS)
    @pytest.mark.parametrize("size", [64, 256, 1024])
    def test_round_trip(self, name, size):
        cfg = WaveletConfig(filter=name, bins_log2=int(math.log2(size)))
        rng = np.random.default_rng(size)
        x = rng.normal(size=size)
        assert np.max(np.abs(idwt(dwt(x, cfg), cfg) - x)) < 1e-10

    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_parseval(self, name):
        cfg = WaveletConfig(filter=name)
        rng = np.random.default_rng(3)
        x = rng.normal(size=256)
        pyr = dwt(x, cfg)
        assert abs(pyr.norm2() - float(np.linalg.norm(x))) < 1e-10

    def test_zero_signal(self):
        cfg = WaveletConfig()
        pyr = dwt(np.zeros(256), cfg)
        assert np.all(pyr.approx == 0.0)
        assert all(np.all(d == 0.0) for d in pyr.details)

    @pytest.mark.parametrize("name", ALL_FILTERS)
    def test_constant_signal_has_no_details(self, name):
        cfg = WaveletConfig(filter=name)
        pyr = dwt(np.full(256, 3.7), cfg)
        for d in pyr.details:
            assert np.max(np.abs(d)) < 1e-10

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            dwt(np.zeros(100), WaveletConfig())

    def test_rejects_shorter_than_filter(self):
        with pytest.raises(ValueError, match="shorter"):
            dwt(np.zeros(4), WaveletConfig(filter="sym4"))

    def test_effective_levels(self):
        assert WaveletConfig(filter="sym4", bins_log2=8, max_level=10).effective_levels == 5
        assert WaveletConfig(filter="haar", bins_log2=8, max_level=3).effective_levels == 3
        with pytest.raises(ValueError, match="decomposition level"):
            WaveletConfig(filter="sym4", bins_log2=3)

    def test_pyramid_shapes(self):
        cfg = WaveletConfig(filter="sym4", bins_log2=8, max_level=10)
        pyr = dwt(np.zeros(256), cfg)
        assert [len(d) for d in pyr.details] == [128, 64, 32, 16, 8]
        assert len(pyr.approx) == 8


class TestHardThreshold:
    def _pyramid(self, details):
        return Pyramid(np.array([1.0, -4.0]), tuple(np.asarray(d, dtype=float) for d in details))

    def test_zero_eta_is_identity(self):
        pyr = self._pyramid([[0.5, -2.0, 1.0]])
        out = hard_threshold(pyr, 0.0)
        np.testing.assert_array_equal(out.details[0], pyr.details[0])
        np.testing.assert_array_equal(out.approx, pyr.approx)

    def test_huge_eta_keeps_only_approximation(self):
        pyr = self._pyramid([[0.5, -2.0], [7.0]])
        out = hard_threshold(pyr, 1e9)
        assert all(np.all(d == 0.0) for d in out.details)
        np.testing.assert_array_equal(out.approx, pyr.approx)

    def test_boundary_is_inclusive(self):
        pyr = self._pyramid([[0.5, -2.0, 1.0]])
        out = hard_threshold(pyr, 1.0)
        np.testing.assert_array_equal(out.details[0], [0.0, -2.0, 1.0])

    def test_rejects_negative_eta(self):
        with pytest.raises(ValueError):
            hard_threshold(self._pyramid([[1.0]]), -0.1)

    @settings(max_examples=60, deadline=None)
    @given(
        details=st.lists(st.floats(-10, 10), min_size=1, max_size=16),
        eta=st.floats(0, 12),
    )
    def test_idempotent(self, details, eta):
        pyr = self._pyramid([details])
        once = hard_threshold(pyr, eta)
        twice = hard_threshold(once, eta)
        np.testing.assert_array_equal(once.details[0], twice.details[0])

    @settings(max_examples=60, deadline=None)
    @given(
        details=st.lists(st.floats(-10, 10), min_size=1, max_size=16),
        eta1=st.floats(0, 12),
        eta2=st.floats(0, 12),
    )
    def test_survivors_monotone_in_eta(self, details, eta1, eta2):
        lo, hi = min(eta1, eta2), max(eta1, eta2)
        pyr = self._pyramid([details])
        n_lo = np.count_nonzero(hard_threshold(pyr, lo).details[0])
        n_hi = np.count_nonzero(hard_threshold(pyr, hi).details[0])
        assert n_hi <= n_lo


class TestThresholdValue:
    def test_formula(self):
        assert threshold_value(1e4, 1.0) == pytest.approx(
            0.01 * math.sqrt(math.log(100.0)), rel=1e-12
        )

    def test_scales_linearly_in_kappa(self):
        assert threshold_value(1e4, 2.0) == pytest.approx(2 * threshold_value(1e4, 1.0))

    def test_requires_horizon_above_one(self):
        with pytest.raises(ValueError):
            threshold_value(1.0, 1.0)


class TestBinning:
    def test_empty(self):
        signal, dropped = bin_samples([], 1.0, WaveletConfig())
        assert np.all(signal == 0.0)
        assert dropped == 0

    def test_single_sample_height(self):
        cfg = WaveletConfig()  # 256 cells over [-10, 10]
        signal, dropped = bin_samples([0.0], 1.0, cfg)
        assert dropped == 0
        assert np.count_nonzero(signal) == 1
        assert signal.max() == pytest.approx(12.8)  # 1 / (20/256)

    def test_mass_is_kept_fraction(self):
        cfg = WaveletConfig()
        rng = np.random.default_rng(8)
        samples = rng.normal(0.0, 6.0, size=20_000)  # some mass beyond +-10
        signal, dropped = bin_samples(samples, len(samples), cfg)
        kept = len(samples) - dropped
        assert dropped > 0
        assert signal.sum() * cfg.cell_width == pytest.approx(kept / len(samples), rel=1e-12)

    def test_resample_grid_length(self):
        cfg = WaveletConfig()
        out = resample_to_grid(np.ones(cfg.n_bins), cfg)
        assert len(out) == 2001


class TestDensityEstimate:
    def test_uniform_density_recovered(self):
        cfg = WaveletConfig(kappa=0.05)
        rng = np.random.default_rng(21)
        samples = rng.random(100_000)
        est = density_estimate(samples, len(samples), 1e5, cfg)
        x = est.grid()
        inner = (x >= 0.1) & (x <= 0.9)
        assert np.max(np.abs(est.values[inner] - 1.0)) < 0.1
        outer = (x < -0.5) | (x > 1.5)
        assert np.max(np.abs(est.values[outer])) < 0.05

    def test_zero_kappa_reproduces_histogram(self):
        cfg = WaveletConfig(kappa=0.0)
        rng = np.random.default_rng(4)
        samples = rng.normal(size=5_000)
        est = density_estimate(samples, len(samples), 1e4, cfg)
        signal, _ = bin_samples(samples, len(samples), cfg)
        np.testing.assert_allclose(est.values, resample_to_grid(signal, cfg), atol=1e-10)

    def test_empty_is_degenerate(self):
        est = density_estimate([], 1.0, 1e4, WaveletConfig())
        assert est.degenerate
        assert np.all(est.values == 0.0)
        assert len(est.values) == 2001

    def test_linearity_at_zero_kappa(self):
        cfg = WaveletConfig(kappa=0.0)
        rng = np.random.default_rng(17)
        a = rng.normal(-1.0, 1.0, size=3_000)
        b = rng.normal(2.0, 0.5, size=5_000)
        est_a = density_estimate(a, len(a), 1e4, cfg)
        est_b = density_estimate(b, len(b), 1e4, cfg)
        est_ab = density_estimate(np.concatenate([a, b]), len(a) + len(b), 1e4, cfg)
        blended = (len(a) * est_a.values + len(b) * est_b.values) / (len(a) + len(b))
        np.testing.assert_allclose(est_ab.values, blended, atol=1e-10)

    def test_grid_invariant(self):
        est = density_estimate([0.5], 1.0, 1e4, WaveletConfig())
        assert len(est.values) == math.floor(20.0 / 0.01) + 1
        assert est.grid()[0] == -10.0
        assert est.grid()[-1] == pytest.approx(10.0)
