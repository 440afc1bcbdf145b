import math

import numpy as np
import pytest
from scipy import stats

from lorentz_sharp import montecarlo as mc
from lorentz_sharp import sharp as sh
from lorentz_sharp.analytic_bounds import median_formula_bound
from lorentz_sharp.constants import get_constants
from lorentz_sharp.core import CaseTag, Params
from lorentz_sharp.fitting import TAIL_T_GRID
from lorentz_sharp.lorentz import sphere_sup

SEED = mc.DEFAULT_SEED


class TestSampling:
    def test_deterministic(self):
        s = mc.Stream.named(SEED, "unit")
        assert np.array_equal(mc.sample_gaussian(50, s), mc.sample_gaussian(50, s))
        assert not np.array_equal(mc.sample_gaussian(50, s), mc.sample_gaussian(50, mc.Stream.named(SEED, "other")))
        assert not np.array_equal(mc.sample_gaussian(50, s, 0), mc.sample_gaussian(50, s, 1))

    def test_moments(self):
        # [DERIVED] CLT: mean within 4 standard errors, variance within 1%.
        x = mc.sample_gaussian(10**6, mc.Stream.named(SEED, "moments"))
        assert abs(x.mean()) < 4 / math.sqrt(10**6)
        assert abs(x.var() - 1) < 0.01

    def test_kolmogorov_smirnov(self):
        # [DERIVED] asymptotic KS critical value at level 1e-3 is 1.9495/sqrt(m).
        m = 10**5
        x = mc.sample_gaussian(m, mc.Stream.named(SEED, "ks"))
        assert stats.kstest(x, "norm").statistic < 1.9495 / math.sqrt(m)

    def test_stream_ids(self):
        assert mc.stream_id(7) == 7
        assert mc.stream_id("a") == 0xAF63DC4C8601EC8C

    def test_worker_count_invariant(self):
        stat = {"n2": mc.euclidean_norm, "x1": mc.FirstCoordinate()}
        one = mc.sample_statistics(300, 9000, SEED, "workers", stat, workers=1)
        two = mc.sample_statistics(300, 9000, SEED, "workers", stat, workers=2)
        for k in stat:
            assert one[k].tobytes() == two[k].tobytes()


class TestEstimates:
    def test_median_first_coordinate(self):
        samples = 10_000
        est = mc.empirical_median(mc.FirstCoordinate(), 5, samples, SEED)
        assert abs(est.point) < 4 / math.sqrt(samples)
        assert est.ci_low <= 0 <= est.ci_high

    def test_euclidean_median(self):
        # [DERIVED] the chi median with n = 1e4 degrees of freedom is sqrt(n) (1 - 1/(6n) + ...).
        n = 10_000
        est = mc.empirical_median(mc.euclidean_norm, n, 2000, SEED)
        assert 0.99 <= est.point / math.sqrt(n) <= 1.01
        assert math.sqrt(stats.chi2.median(n)) == pytest.approx(est.point, rel=2e-3)

    def test_psi_median_bracketed(self):
        params = Params(1000, 0.3, 1.4, 1.0)
        r2, q = 2 * params.r, params.alpha
        est = mc.empirical_median(mc.PsiStatistic(r2, q), params.n, 10_000, SEED)
        assert median_formula_bound(params.n, r2, q).contains(est.point)

    def test_reproducible(self):
        a = mc.empirical_median(mc.euclidean_norm, 40, 500, 11)
        b = mc.empirical_median(mc.euclidean_norm, 40, 500, 11)
        assert a == b

    def test_median_interval_oracle(self):
        # [DERIVED] order-statistic interval for m = 101: ranks 41 and 61 (1-based).
        v = np.arange(101.0)
        est = mc.median_estimate(v, 0, "x")
        assert (est.point, est.ci_low, est.ci_high) == (50.0, 40.0, 60.0)

    def test_proportion_wilson(self):
        # [DERIVED] Wilson interval for 10/100 at 95%.
        est = mc.proportion_estimate(10, 100, 0, "p")
        z = stats.norm.isf(0.025)
        ph, m = 0.1, 100
        centre = (ph + z * z / (2 * m)) / (1 + z * z / m)
        half = z * math.sqrt(ph * (1 - ph) / m + z * z / (4 * m * m)) / (1 + z * z / m)
        assert (est.ci_low, est.ci_high) == pytest.approx((centre - half, centre + half), rel=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            mc.EmpiricalEstimate(0.5, 0.4, 0.6, 99, 0, "x")
        with pytest.raises(ValueError):
            mc.EmpiricalEstimate(0.7, 0.4, 0.6, 100, 0, "x")
        with pytest.raises(ValueError):
            mc.empirical_median(mc.euclidean_norm, 4, 50)


class TestStatistics:
    def test_grid_statistic(self):
        rows = np.sort(np.abs(np.random.default_rng(0).standard_normal((6, 30))), axis=1)[:, ::-1]
        g = mc.PsiGridStatistic((0.0, 0.5), 1.3)(rows)
        assert np.allclose(g[:, 1], mc.PsiStatistic(0.5, 1.3)(rows), rtol=1e-13)
        assert np.allclose(mc.PsiStatistic(0.0, 2.0, root=True)(rows), np.linalg.norm(rows, axis=1))
        zero = mc.PsiGridStatistic((0.0,), 0.0)(rows)
        assert np.all(zero == 30.0)

    def test_envelope_ratio(self):
        n, t = 7, 1.5
        row = np.array([[5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.1]])
        i = np.arange(1, 5)
        expected = np.max(row[0, :4] / np.sqrt(np.log(n / i) + t * t / i))
        assert mc.EnvelopeRatio(n, t)(row)[0] == pytest.approx(expected)
        assert mc.half_range(7) == 4 and mc.half_range(8) == 4


class TestEnvelope:
    def test_infinite_constant(self):
        rep = mc.order_stat_envelope_check(200, 1.0, math.inf, 1000, SEED)
        assert rep.empirical_violation_prob.point == 0.0
        assert rep.passed

    def test_fitted_constant(self):
        C = get_constants().require("orderstat_envelope").C_fit
        rep = mc.order_stat_envelope_check(1000, 3.0, C, 10_000, SEED)
        assert rep.passed
        assert rep.target == pytest.approx(2 * math.exp(-9))

    def test_quarter_constant_violates(self):
        C = get_constants().require("orderstat_envelope").C_fit
        rep = mc.order_stat_envelope_check(1000, 1.0, C / 4, 2000, SEED)
        assert rep.empirical_violation_prob.point > 0.99
        assert not rep.passed

    def test_invalid(self):
        with pytest.raises(ValueError):
            mc.order_stat_envelope_check(2, 1.0, 1.0, 1000)
        with pytest.raises(ValueError):
            mc.order_stat_envelope_check(10, -1.0, 1.0, 1000)


class TestBand:
    def test_trivial_band(self):
        rep = mc.simultaneous_median_band_check(100, 1000, SEED, band=(0.0, math.inf))
        assert rep.probability.point == 1.0

    def test_fitted_band(self):
        rep = mc.simultaneous_median_band_check(10_000, 2000, SEED)
        assert rep.passed
        assert rep.probability.point >= 0.51

    def test_top_order_statistic(self):
        # [DERIVED] extreme-value oracle: the median of max |X_i| solves
        # (2 Phi(u) - 1)^n = 1/2.
        n = 10_000
        u = stats.norm.isf((1 - 0.5 ** (1 / n)) / 2)
        rep = mc.simultaneous_median_band_check(n, 2000, SEED, band=(0.0, math.inf))
        assert 0.8 <= rep.top_ratio_median <= 1.1
        assert rep.top_ratio_median == pytest.approx(u / math.sqrt(2 * math.log(n)), rel=0.01)


def exact_pair(params):
    sn = sh.build_sharp_norm(params)
    return sh.certificate(params, "exact", sn=sn), sn


class TestCoverage:
    def test_case_iii_example(self):
        params = Params(1000, 0.1, 1.2, 2.0)
        cert, sn = exact_pair(params)
        rep = mc.coverage_check(params, cert, sn, 100_000, SEED)
        assert rep.passed
        assert rep.estimate.ci_high < 2 * math.exp(-2)

    def test_case_iva_example(self):
        params = Params(10_000, 0.3, 1.4, 3.0)
        assert params.case is CaseTag.IVa
        cert, sn = exact_pair(params)
        rep = mc.coverage_check(params, cert, sn, 20_000, SEED)
        assert rep.passed
        assert rep.target == pytest.approx(2 * math.exp(-4.5))

    def test_monotone_in_t(self):
        items, est = [], []
        for t in (0.5, 1.0, 2.0, 3.0, 6.0):
            items.append(exact_pair(Params(300, 0.4, 1.25, t)))
        est = [r.estimate.point for r in mc.coverage_batch(items, 300, 5000, SEED)]
        assert all(a >= b for a, b in zip(est, est[1:]))
        assert est[-1] == 0.0

    def test_shared_n(self):
        with pytest.raises(ValueError):
            mc.coverage_batch([exact_pair(Params(100, 0.4, 1.25, 1.0))], 200, 1000, SEED)


@pytest.fixture(scope="module")
def profile():
    return mc.sharpness_profile(Params(100, 0.0, 1.5, 1.0), TAIL_T_GRID, 100_000, SEED)


class TestSharpness:
    def test_inclusion(self, profile):
        assert profile.inclusion_violations == 0
        assert profile.b == pytest.approx(10.0)  # l1 norm over the unit sphere in R^100
        assert profile.tails_monotone

    def test_slope_in_window(self, profile):
        fc = get_constants().require("tail_slope")
        assert fc.c_fit <= profile.sigma <= fc.C_fit

    def test_seed_stability(self, profile):
        other = mc.sharpness_profile(Params(100, 0.0, 1.5, 1.0), TAIL_T_GRID, 100_000, SEED + 1)
        assert other.sigma == pytest.approx(profile.sigma, rel=0.2)

    def test_inclusion_low_power(self):
        params = Params(64, 1.0, 1.1, 1.0)
        prof = mc.sharpness_profile(params, (0.5, 1.0), 20_000, SEED)
        assert prof.inclusion_violations == 0
        assert prof.b == pytest.approx(sphere_sup(64, 2.0, 0.2))

    def test_requires_p_above_one(self):
        with pytest.raises(ValueError):
            mc.sharpness_profile(Params(10, 0.0, 1.0, 1.0), (1.0,), 1000)


class TestTailSlope:
    def test_exact_gaussian_tail(self):
        ts = [0.5, 1.0, 1.5, 2.0]
        tails = [2 * math.exp(-0.5 * t * t) for t in ts]
        sigma, intercept, flagged = mc.fit_tail_slope(ts, tails)
        assert sigma == pytest.approx(0.5, rel=1e-12)
        assert intercept == pytest.approx(-math.log(2), rel=1e-12)
        assert flagged == []

    def test_flags_sparse_points(self):
        sigma, _, flagged = mc.fit_tail_slope([1, 2, 3], [0.5, 0.1, 0.0], samples=1000)
        assert flagged == [3]
        assert sigma == pytest.approx((math.log(0.5) - math.log(0.1)) / 3)
        assert math.isnan(mc.fit_tail_slope([1, 2], [0.5, 0.0])[0])
