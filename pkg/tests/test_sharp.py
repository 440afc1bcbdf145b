import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_sharp import sharp as sh
from lorentz_sharp.constants import ConstantsNotFrozenError, ConstantsTable
from lorentz_sharp.core import CaseTag, Params, floor_n_over_e
from lorentz_sharp.grids import load_grid
from lorentz_sharp.lorentz import psi
from lorentz_sharp.stress import ProfileBatch, psi_profiles

IVA = Params(10_000, 0.3, 1.4, 3.0)

# One representative per case; used by property tests.
REPS = [
    Params(200, 0.75, 1.75, 2.0),  # I
    Params(200, 0.4, 1.25, 2.0),  # II
    Params(200, 0.1, 1.2, 2.0),  # III
    Params(2000, 0.3, 1.4, 2.0),  # IVa
    Params(200, 0.45, 1.1, 2.0),  # IVb
]


def test_representatives_cover_cases():
    assert [str(p.case) for p in REPS] == ["I", "II", "III", "IVa", "IVb"]


class TestConstruction:
    def test_case_iii_l1(self):
        sn = sh.build_sharp_norm(Params(3, 0.0, 1.25, 1.0))
        assert sn.case is CaseTag.III and sn.kind == sh.WEIGHTED
        assert np.array_equal(sn.coeffs, [1.0, 1.0, 1.0])
        assert sn([1, -2, 3]) == 6.0
        assert sh.sharp_lipschitz(sn) == pytest.approx(math.sqrt(3))

    def test_case_ii_example(self):
        # [DERIVED] floor(10/e) = 3 coefficients, the first (ln 10 + 1)**-0.25
        sn = sh.build_sharp_norm(Params(10, 0.5, 1.25, 1.0))
        assert sn.case is CaseTag.II
        assert len(sn.coeffs) == 3
        assert sn.coeffs[0] == pytest.approx((math.log(10) + 1) ** -0.25, rel=1e-15)
        i = np.arange(1, 4)
        oracle = [k ** (-1.0) * (math.log(10 / k) + 1 / k) ** -0.25 for k in i]
        assert np.allclose(sn.coeffs, oracle, rtol=1e-14)

    def test_case_iva_monotone_full_scan(self):
        sn = sh.build_sharp_norm(IVA)
        assert sn.case is CaseTag.IVa
        assert len(sn.coeffs) == floor_n_over_e(10_000) == 3678
        assert np.all(np.diff(sn.coeffs) <= 0)

    def test_case_i_and_ivb_kinds(self):
        assert sh.build_sharp_norm(REPS[0]).kind == sh.LORENTZ
        sn = sh.build_sharp_norm(REPS[4])
        assert sn.kind == sh.EUCLIDEAN
        assert sn([3, 4] + [0] * 198) == pytest.approx(5.0)
        assert sh.sharp_lipschitz(sn) == 1.0

    def test_coefficients_read_only(self):
        sn = sh.build_sharp_norm(REPS[1])
        with pytest.raises(ValueError):
            sn.coeffs[0] = 1.0

    def test_monotonicity_error(self):
        with pytest.raises(sh.MonotonicityError) as info:
            sh._check_monotone(np.array([1.0, 0.5, 0.7]))
        assert info.value.index == 3

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            sh.build_sharp_norm(REPS[1])(np.ones(5))

    def test_digest_stable(self):
        a = sh.build_sharp_norm(Params(100, 0.1, 1.2, 1.0))
        b = sh.build_sharp_norm(Params(100, 0.1, 1.2, 3.0))
        assert a.digest == b.digest  # Case III does not depend on t
        assert len(a.digest) == 16
        c = sh.build_sharp_norm(Params(100, 0.4, 1.25, 1.0))
        d = sh.build_sharp_norm(Params(100, 0.4, 1.25, 3.0))
        assert c.digest != d.digest

    def test_monotone_on_whole_grid(self):
        for gp in load_grid():
            if gp.params.case in (CaseTag.II, CaseTag.IVa):
                c = sh.build_sharp_norm(gp.params).coeffs
                assert np.all(c[1:] <= c[:-1] * (1 + 1e-12))


class TestNormAxioms:
    @pytest.mark.parametrize("params", REPS, ids=lambda p: str(p.case))
    def test_triangle_and_homogeneity(self, params):
        sn = sh.build_sharp_norm(params)
        rng = np.random.default_rng(11)
        x = rng.standard_normal((10_000, params.n)) * rng.exponential(1, (10_000, 1))
        y = rng.standard_normal((10_000, params.n)) * rng.exponential(1, (10_000, 1))
        ev = lambda z: sn.evaluate_sorted(-np.sort(-np.abs(z), axis=1))
        assert np.all(ev(x + y) <= (ev(x) + ev(y)) * (1 + 1e-12))
        lam = rng.uniform(-5, 5, (10_000, 1))
        assert np.allclose(ev(lam * x), np.abs(lam[:, 0]) * ev(x), rtol=1e-12)


class TestHolderFactor:
    def test_degenerate_example(self):
        # The p = 1 example at n = 3: psi is the constant sum of 0**0 = 1 terms.
        params = Params(3, 0.0, 1.0, 1.0)
        assert params.degenerate
        F = sh.holder_factor(params)
        assert F == 3.0
        assert psi([0.3, -2.0, 0.0], 0.0, 0.0) == F

    def test_case_ivb_example(self):
        params = Params(1000, 0.45, 1.1, 1.0)
        assert params.case is CaseTag.IVb
        oracle = math.fsum(1 / k for k in range(1, 1001)) ** 0.9
        assert sh.holder_factor(params) == pytest.approx(oracle, rel=1e-14)

    def test_case_i_is_one(self):
        assert sh.holder_factor(REPS[0]) == 1.0

    def test_peel_constant(self):
        assert sh.peel_constant(10) == pytest.approx(10 / 3)
        assert sh.peel_constant(10_000) < 2 * math.e

    def test_mismatched_norm(self):
        with pytest.raises(ValueError):
            sh.holder_factor(REPS[1], sh.build_sharp_norm(REPS[2]))

    @pytest.mark.parametrize(
        "params", [Params(100, 0.1, 1.2, 2.0), Params(1000, 0.45, 1.1, 1.0)] + REPS, ids=lambda p: f"{p.case}-{p.n}"
    )
    def test_random_x_stress(self, params):
        sn = sh.build_sharp_norm(params)
        F = sh.holder_factor(params, sn)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((100_000 // 10, params.n)) ** 3
        rows = -np.sort(-np.abs(x), axis=1)
        ratios = sh.holder_ratios(ProfileBatch.dense(rows), sn, F)
        assert np.nanmax(ratios) <= 1 + 1e-9

    @pytest.mark.parametrize("params", REPS[1:4], ids=lambda p: str(p.case))
    def test_dual_profile_is_tight(self, params):
        # The Holder equality profile attains F up to the tail peel.
        sn = sh.build_sharp_norm(params)
        F = sh.holder_factor(params, sn)
        v = sn.holder_dual_weights()
        prof = np.zeros(params.n)
        prof[: len(v)] = v / sn.coeffs
        prof = np.maximum.accumulate(prof[::-1])[::-1]
        ratio = sh.holder_ratios(ProfileBatch.dense(prof[None, :]), sn, F)[0]
        peel = sh.peel_constant(params.n) if params.case is not CaseTag.III else 1.0
        assert 0.9 / peel <= ratio <= 1 + 1e-12

    def test_dual_weights_need_weighted(self):
        with pytest.raises(ValueError):
            sh.build_sharp_norm(REPS[0]).holder_dual_weights()


class TestLipschitz:
    def test_finite_difference_probe(self):
        sn = sh.build_sharp_norm(IVA)
        L = sh.sharp_lipschitz(sn)
        rng = np.random.default_rng(2)
        for _ in range(4):
            x = rng.standard_normal((1000, IVA.n))
            y = x + rng.standard_normal((1000, IVA.n)) * rng.exponential(0.1, (1000, 1))
            ev = lambda z: sn.evaluate_sorted(-np.sort(-np.abs(z), axis=1))
            ratio = np.abs(ev(x) - ev(y)) / np.linalg.norm(x - y, axis=1)
            assert np.all(ratio <= L * (1 + 1e-12))

    def test_lipschitz_attained_by_coefficients(self):
        sn = sh.build_sharp_norm(REPS[1])
        u = np.zeros(sn.params.n)
        u[: len(sn.coeffs)] = sn.coeffs / np.linalg.norm(sn.coeffs)
        assert sn(u) == pytest.approx(sh.sharp_lipschitz(sn), rel=1e-12)


class TestCaseIVa:
    def test_worked_example(self):
        iv = sh.compute_case_iv_internals(IVA)
        # [DERIVED] A, K, A0 from the defining formulas and an independent bisection
        A = 0.4**1.4 * math.log(1e4) / 1e4**0.4
        assert iv.A == pytest.approx(A, rel=1e-14)
        assert iv.A == pytest.approx(0.0642, rel=2e-3)
        assert iv.K == pytest.approx(10.42, abs=5e-3)
        assert iv.A0 == pytest.approx(264.05, abs=0.01)
        assert iv.residual() < 1e-9
        assert iv.a0_in_range() and iv.logs_ok() and iv.scaled_beta_monotone() and iv.piecewise_ok()

    def test_independent_root(self):
        from scipy.optimize import brentq

        iv = sh.compute_case_iv_internals(IVA)
        z = brentq(lambda s: s / math.log(s) - iv.K, math.e, 1e4, xtol=1e-14)
        assert iv.A0 == pytest.approx(IVA.n / z, rel=1e-10)

    def test_requires_iva(self):
        with pytest.raises(ValueError):
            sh.compute_case_iv_internals(REPS[1])

    def test_every_grid_point(self):
        for gp in load_grid(doubled=True):
            if gp.params.case is CaseTag.IVa:
                iv = sh.compute_case_iv_internals(gp.params)
                assert iv.residual() < 1e-9 and iv.a0_in_range() and iv.logs_ok()
                assert iv.scaled_beta_monotone() and iv.piecewise_ok()

    def test_range_failure(self, monkeypatch):
        # The validity window is never violated at real IVa points, so force it.
        monkeypatch.setattr(sh, "case_iva_scale", lambda n, r, p: 1e-9)
        with pytest.raises(sh.CaseIVaRangeError, match="n <= n0"):
            sh.compute_case_iv_internals(IVA)


@pytest.fixture(scope="module")
def pairs():
    pts = REPS + [Params(100, 0.1, 1.2, 2.0), Params(50, 0.2, 1.0, 1.0)]
    return dict(zip(pts, sh.exact_certificates(pts, samples=2000)))


@pytest.fixture(scope="module")
def ratios():
    """paper-mode R / exact-mode R at every non-degenerate canonical point."""
    pts = [gp.params for gp in load_grid() if not gp.params.degenerate]
    out = {}
    for params, (cert, sn) in zip(pts, sh.exact_certificates(pts)):
        paper = sh.certificate(params, "paper", sn=sn)
        out[params] = paper.R / cert.R
    return out


class TestCertificates:
    def test_exact_identity(self, pairs):
        for params, (cert, sn) in pairs.items():
            if params.degenerate:
                continue
            assert cert.S == pytest.approx(cert.median.point + params.t * sh.sharp_lipschitz(sn), rel=1e-15)
            assert cert.R == pytest.approx(cert.holder_factor * cert.S**params.alpha, rel=1e-15)
            assert cert.tail_bound == pytest.approx(2 * math.exp(-params.t**2 / 2))

    def test_case_i_r_equals_s_power(self, pairs):
        cert, _ = pairs[REPS[0]]
        assert cert.R == pytest.approx(cert.S ** REPS[0].alpha, rel=1e-15)

    def test_degenerate(self, pairs):
        params = Params(50, 0.2, 1.0, 1.0)
        cert, sn = pairs[params]
        assert cert.degenerate and cert.S == math.inf
        assert cert.R == pytest.approx(math.fsum(k**-0.4 for k in range(1, 51)))
        d = json.loads(cert.to_json())
        assert d["S"] is None and d["degenerate"] is True
        assert sh.implication_check(np.zeros(50), cert, sn)
        assert sh.implication_check(np.arange(50.0), cert, sn)

    def test_ivb_median_is_sqrt_n(self):
        params = Params(10_000, 0.45, 1.1, 1.0)
        cert = sh.certificate(params, samples=1000)
        assert 0.99 <= cert.median.point / 100 <= 1.01
        assert cert.S == pytest.approx(cert.median.point + 1.0)

    def test_json_fields(self, pairs):
        cert, sn = pairs[REPS[2]]
        d = json.loads(cert.to_json())
        for key in ("case", "n", "r", "p", "t", "mode", "S", "R", "holder_factor", "coeffs_digest"):
            assert key in d
        assert d["coeffs_digest"] == sn.digest
        assert d["median"]["samples"] == 2000

    def test_implication_examples(self, pairs):
        cert, sn = pairs[REPS[1]]
        n = REPS[1].n
        assert sh.implication_check(np.zeros(n), cert, sn)
        big = np.full(n, 1e6)
        assert sn(big) > cert.S and sh.implication_check(big, cert, sn)
        e = np.zeros(n)
        e[0] = 1.0
        edge = e * cert.S / sn(e)
        assert sh.implication_check(edge, cert, sn)

    @pytest.mark.parametrize("k", range(5))
    def test_boundary_scaled_stress(self, pairs, k):
        params = REPS[k]
        cert, sn = pairs[params]
        rng = np.random.default_rng(k)
        x = -np.sort(-np.abs(rng.standard_normal((5000, params.n)) ** rng.integers(1, 4)), axis=1)
        x *= (cert.S / sn.evaluate_sorted(x))[:, None]
        assert np.all(sh.implication_check_sorted(x, cert, sn))

    def test_forced_violation_detected(self, pairs):
        cert, sn = pairs[REPS[2]]
        x = np.ones(REPS[2].n)
        x *= 0.999 * cert.S / sn(x)
        value = psi(x, 2 * REPS[2].r, REPS[2].alpha)
        bad = sh.BoundCertificate(cert.params, cert.case, "exact", cert.S, value / 2, cert.holder_factor, cert.tail_bound)
        assert not sh.implication_check(x, bad, sn)

    def test_invalid_mode(self):
        with pytest.raises(ValueError):
            sh.certificate(REPS[0], mode="guess")

    def test_paper_mode_needs_constants(self):
        with pytest.raises(ConstantsNotFrozenError):
            sh.certificate(REPS[1], mode="paper", constants=ConstantsTable())

    def test_bad_certificate(self):
        with pytest.raises(ValueError):
            sh.BoundCertificate(REPS[0], CaseTag.I, "exact", -1.0, 1.0, 1.0, 0.1)


class TestPaperMode:
    def test_within_window_outside_case_i(self, ratios):
        bad = {p: v for p, v in ratios.items() if p.case is not CaseTag.I and not (1 / 16 <= v <= 16)}
        assert not bad

    @pytest.mark.xfail(strict=True, reason="the Case I closed form overshoots by up to ~22x at r=0, p=2; see ledger")
    def test_within_window_case_i(self, ratios):
        assert all(1 / 16 <= v <= 16 for p, v in ratios.items() if p.case is CaseTag.I)

    def test_paper_details(self):
        paper = sh.certificate(IVA, "paper", samples=1000)
        assert "R_simple" in paper.details and "chained_median" in paper.details
        assert paper.R == pytest.approx(paper.holder_factor * paper.S**IVA.alpha)
        with pytest.raises(ValueError):
            sh.paper_R_simple(REPS[0], 1.0)

    @pytest.mark.parametrize("params", REPS, ids=lambda p: str(p.case))
    def test_threshold_t(self, params):
        t = sh.remark_threshold_t(params)
        assert t > 0 and math.isfinite(t)


class TestLagrangeProbe:
    def test_probe(self):
        rep = sh.lagrange_stationarity_probe(IVA, perturbations=200, samples=300)
        assert rep.zero_ratio == 1.0
        assert rep.homogeneity_ratio == pytest.approx(1.0, rel=1e-12)
        assert rep.passed
        assert rep.worst_ratio <= 1.5


@settings(max_examples=25, deadline=None)
@given(st.integers(20, 400), st.sampled_from([(0.4, 1.25), (0.1, 1.2), (0.0, 1.4), (0.75, 1.25), (1.5, 1.3), (0.35, 1.3)]),
       st.floats(0.5, 4))
def test_holder_exact_property(n, rp, t):
    params = Params(n, rp[0], rp[1], t)
    sn = sh.build_sharp_norm(params)
    F = sh.holder_factor(params, sn)
    rng = np.random.default_rng(n)
    rows = -np.sort(-np.abs(rng.standard_normal((200, n)) ** 2), axis=1)
    b = ProfileBatch.dense(rows)
    assert np.all(psi_profiles(b, 2 * params.r, params.alpha) <= F * sn.evaluate_profiles(b) ** params.alpha * (1 + 1e-9))
