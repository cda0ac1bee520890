import math

import numpy as np
import pytest

from t1forge import stats
from t1forge.errors import (
    ConstantSeries,
    DimensionMismatch,
    LengthMismatch,
    TooFew,
    ZeroVariance,
)

from oracles import f_cdf_quad, quantile_r7, t_cdf_quad


class TestDice:
    def test_identical_nonempty(self):
        m = np.zeros((4, 4), dtype=bool)
        m[1:3, 1:3] = True
        assert stats.dice(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[0, 0] = b[3, 3] = True
        assert stats.dice(a, b) == 0.0

    def test_half_overlap(self):
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[0, :4] = True          # |A| = 4
        b[0, 2:] = b[1, :2] = True   # |B| = 4, overlap 2 -> 2*2/8
        assert stats.dice(a, b) == 0.5

    def test_both_empty_is_one(self):
        z = np.zeros((3, 3), dtype=bool)
        assert stats.dice(z, z) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            stats.dice(np.zeros((2, 2), dtype=bool), np.zeros((3, 3), dtype=bool))

    def test_symmetry_random(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            a = rng.random((6, 6)) < 0.5
            b = rng.random((6, 6)) < 0.5
            assert stats.dice(a, b) == stats.dice(b, a)


class TestQuantiles:
    def test_r7_matches_hand_rule(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            vals = rng.normal(0, 10, size=rng.integers(2, 30)).tolist()
            p = float(rng.random())
            assert stats.quantile(vals, p) == pytest.approx(quantile_r7(vals, p), abs=1e-12)


class TestRemoveOutliers:
    def test_all_equal_unchanged(self):
        assert stats.remove_outliers([5.0] * 6 ) == [5.0] * 6

    def test_extreme_value_removed(self):
        vals = [900.0 + k for k in range(10)] + [5000.0]
        out = stats.remove_outliers(vals)
        assert 5000.0 not in out and len(out) == 10

    def test_mild_values_kept(self):
        vals = [10.0, 11.0, 12.0, 13.0, 14.0]
        q1, q3 = quantile_r7(vals, 0.25), quantile_r7(vals, 0.75)
        assert all(q1 - 3 * (q3 - q1) <= v <= q3 + 3 * (q3 - q1) for v in vals)
        assert stats.remove_outliers(vals) == vals

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            vals = rng.normal(0, 1, 12).tolist() + rng.normal(0, 50, 3).tolist()
            once = stats.remove_outliers(vals)
            assert stats.remove_outliers(once) == once

    def test_too_few(self):
        with pytest.raises(TooFew):
            stats.remove_outliers([1.0, 2.0, 3.0])

    def test_order_preserved(self):
        vals = [3.0, 1.0, 2.0, 4.0, 100.0, 0.0]
        out = stats.remove_outliers(vals)
        assert out == [3.0, 1.0, 2.0, 4.0, 0.0]


class TestBlandAltman:
    def test_identical_series(self):
        ba = stats.bland_altman([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert ba.bias == 0.0 and ba.sd == 0.0
        assert (ba.loa_lower, ba.loa_upper) == (0.0, 0.0)
        assert ba.p_value == 1.0

    def test_constant_shift(self):
        ba = stats.bland_altman([1.0, 2.0, 3.0], [6.0, 7.0, 8.0])
        assert ba.bias == 5.0 and ba.sd == 0.0
        assert (ba.loa_lower, ba.loa_upper) == (5.0, 5.0)

    def test_frozen_example(self):
        # d = {-1, 0, 1, 4}: bias 1, SD sqrt(14/3), t = 2/sd, p from the t CDF
        x = [0.0, 0.0, 0.0, 0.0]
        y = [-1.0, 0.0, 1.0, 4.0]
        ba = stats.bland_altman(x, y)
        sd = math.sqrt(14.0 / 3.0)
        assert ba.bias == pytest.approx(1.0, abs=1e-12)
        assert ba.sd == pytest.approx(sd, abs=1e-12)
        assert ba.loa_lower == pytest.approx(1.0 - 1.96 * sd, abs=1e-9)
        assert ba.loa_upper == pytest.approx(1.0 + 1.96 * sd, abs=1e-9)
        t = 1.0 / (sd / 2.0)
        p_oracle = 2.0 * (1.0 - t_cdf_quad(t, 3))
        assert t == pytest.approx(0.9258200998, abs=1e-9)
        assert ba.p_value == pytest.approx(p_oracle, abs=1e-9)
        assert ba.p_value == pytest.approx(0.4227, abs=5e-4)

    def test_translation_invariance(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            x = rng.normal(900, 50, 8)
            y = x + rng.normal(0, 5, 8)
            c = float(rng.normal(0, 100))
            a = stats.bland_altman(x, y)
            b = stats.bland_altman(x + c, y + c)
            assert a.bias == pytest.approx(b.bias, abs=1e-9)
            assert a.loa_lower == pytest.approx(b.loa_lower, abs=1e-9)
            assert a.loa_upper == pytest.approx(b.loa_upper, abs=1e-9)

    def test_length_mismatch_and_too_few(self):
        with pytest.raises(LengthMismatch):
            stats.bland_altman([1.0, 2.0], [1.0])
        with pytest.raises(TooFew):
            stats.bland_altman([1.0], [1.0])


class TestPearson:
    def test_positive_affine_is_one(self):
        x = [1.0, 2.0, 5.0, 7.0]
        assert stats.pearson(x, [2 * v + 3 for v in x]) == pytest.approx(1.0, abs=1e-12)

    def test_negation_is_minus_one(self):
        x = [1.0, 2.0, 5.0]
        assert stats.pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)

    def test_frozen_example(self):
        # cov = 3/4, sx = sy = sqrt(5)/2 -> r = 0.6 exactly
        assert stats.pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)

    def test_constant_series_raises(self):
        with pytest.raises(ConstantSeries):
            stats.pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_affine_invariance_and_sign_flip(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            x = rng.normal(0, 1, 10)
            y = rng.normal(0, 1, 10)
            r = stats.pearson(x, y)
            a, b = float(rng.uniform(0.1, 5)), float(rng.normal())
            assert stats.pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)
            assert stats.pearson(-x, y) == pytest.approx(-r, abs=1e-9)


class TestReferenceRange:
    def test_frozen_two_point_example(self):
        # {0, 2}: mean 1, SD sqrt(2), t(0.975, 1) = 12.7062047362,
        # half-width = t * sqrt(2) * sqrt(1.5) = t * sqrt(3) ~ 22.0078
        rr = stats.reference_range([0.0, 2.0])
        half = 12.706204736174698 * math.sqrt(3.0)
        assert rr.mean == 1.0
        assert rr.lower == pytest.approx(1.0 - half, abs=1e-6)
        assert rr.upper == pytest.approx(1.0 + half, abs=1e-6)
        assert rr.upper - rr.mean == pytest.approx(22.0078, abs=1e-3)

    def test_large_normal_sample_approaches_196(self):
        rng = np.random.default_rng(14)
        vals = rng.standard_normal(10_000)
        rr = stats.reference_range(vals)
        mean, sd = vals.mean(), vals.std(ddof=1)
        assert abs((rr.upper - mean) / sd - 1.96) < 0.05
        assert abs((mean - rr.lower) / sd - 1.96) < 0.05

    def test_constant_sample(self):
        rr = stats.reference_range([7.0, 7.0, 7.0])
        assert rr.lower == rr.mean == rr.upper == 7.0

    def test_too_few(self):
        with pytest.raises(TooFew):
            stats.reference_range([1.0])


class TestHypothesisTests:
    def test_paired_identical_is_p_one(self):
        t, p = stats.paired_t([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert (t, p) == (0.0, 1.0)

    def test_paired_against_quadrature(self):
        rng = np.random.default_rng(15)
        x = rng.normal(10, 2, 12)
        y = x + rng.normal(0.8, 1.0, 12)
        t, p = stats.paired_t(x, y)
        d = x - y
        t_ref = d.mean() / (d.std(ddof=1) / math.sqrt(d.size))
        assert t == pytest.approx(t_ref, abs=1e-12)
        assert p == pytest.approx(2 * (1 - t_cdf_quad(abs(t), 11)), abs=1e-9)

    def test_unpaired_against_quadrature(self):
        rng = np.random.default_rng(16)
        x = rng.normal(0, 1, 10)
        y = rng.normal(0.7, 1, 14)
        t, p = stats.unpaired_t(x, y)
        df = 22
        assert p == pytest.approx(2 * (1 - t_cdf_quad(abs(t), df)), abs=1e-9)

    def test_f_var_detects_sd_gap(self):
        # mirror SDs 61.64 vs 46.41 with n = 1000 each
        rng = np.random.default_rng(17)
        x = rng.standard_normal(1000)
        x = (x - x.mean()) / x.std(ddof=1) * 61.64
        y = rng.standard_normal(1000)
        y = (y - y.mean()) / y.std(ddof=1) * 46.41
        f, p = stats.f_var(x, y)
        assert f == pytest.approx((61.64 / 46.41) ** 2, abs=1e-9)
        assert p < 0.001

    def test_f_var_symmetric_in_argument_order(self):
        rng = np.random.default_rng(18)
        x = rng.normal(0, 2, 20)
        y = rng.normal(0, 1, 25)
        assert stats.f_var(x, y) == stats.f_var(y, x)

    def test_f_var_zero_variance(self):
        with pytest.raises(ZeroVariance):
            stats.f_var([1.0, 1.0], [2.0, 2.0])

    def test_zscore_frozen(self):
        # (946.44 - 927.62) / 46.41
        assert stats.zscore(946.44, 927.62, 46.41) == pytest.approx(0.4055, abs=1e-4)

    def test_zscore_needs_positive_sd(self):
        with pytest.raises(ZeroVariance):
            stats.zscore(1.0, 0.0, 0.0)

    def test_p_values_in_unit_interval(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            x = rng.normal(0, 1, 8)
            y = rng.normal(0.2, 1.5, 8)
            for _, p in (stats.paired_t(x, y), stats.unpaired_t(x, y), stats.f_var(x, y)):
                assert 0.0 <= p <= 1.0


class TestDistributionKernels:
    def test_t_cdf_matches_quadrature_grid(self):
        for df in (1, 3, 9, 30):
            for t in np.linspace(-4.0, 4.0, 20):
                assert stats.t_cdf(float(t), df) == pytest.approx(
                    t_cdf_quad(float(t), df), abs=1e-6)

    def test_f_cdf_matches_quadrature_grid(self):
        for d1, d2 in ((3, 7), (10, 10), (999, 999)):
            for f in np.linspace(0.1, 4.0, 20):
                assert stats.f_cdf(float(f), d1, d2) == pytest.approx(
                    f_cdf_quad(float(f), d1, d2), abs=1e-6)

    def test_t_quantile_inverts_cdf(self):
        for df in (1, 2, 5, 50):
            for p in (0.6, 0.9, 0.975, 0.999):
                t = stats.t_quantile(p, df)
                assert stats.t_cdf(t, df) == pytest.approx(p, abs=1e-10)

    def test_t_quantile_975_df1_frozen(self):
        assert stats.t_quantile(0.975, 1) == pytest.approx(12.706204736, abs=1e-6)
