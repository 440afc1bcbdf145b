import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorentz_sharp.core import (
    CaseTag,
    Params,
    bisect_increasing,
    bisect_log,
    compensated_sum,
    dispatch_case,
    floor_n_over_e,
    fnv1a64,
    on_case_iv_line,
    powzero,
    rearrange,
    sorted_abs_rows,
)


class TestParams:
    def test_valid(self):
        p = Params(100, 0.3, 1.4, 2)
        assert (p.n, p.r, p.p, p.t) == (100, 0.3, 1.4, 2.0)
        assert p.alpha == pytest.approx(0.8)
        assert not p.degenerate
        assert Params(10, 0, 1, 1).degenerate

    @pytest.mark.parametrize(
        "args",
        [(2, 0.3, 1.2, 1), (10.5, 0.3, 1.2, 1), (10, -0.1, 1.2, 1), (10, 0.3, 0.9, 1), (10, 0.3, 1.2, 0),
         (10, math.nan, 1.2, 1), (10, 0.3, math.inf, 1), (True, 0.3, 1.2, 1)],
    )
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Params(*args)

    def test_as_dict(self):
        assert Params(10, 0.5, 1.25, 3).as_dict() == {"n": 10, "r": 0.5, "p": 1.25, "t": 3.0}


class TestDispatch:
    @pytest.mark.parametrize(
        "r,p,n,case",
        [
            (0.0, 2.0, 100, CaseTag.I),
            (0.3, 1.5, 100, CaseTag.I),
            (0.25, 1.5, 100, CaseTag.I),  # corner of the IV line belongs to I
            (0.1, 1.2, 100, CaseTag.III),
            (0.0, 1.4, 100, CaseTag.III),
            (0.4, 1.25, 100, CaseTag.II),
            (1.5, 1.3, 100, CaseTag.II),
            (0.75, 1.25, 100, CaseTag.II),
            (0.3, 1.4, 10_000, CaseTag.IVa),  # (1-0.6) ln 1e4 = 3.68 >= e
            (0.3, 1.4, 100, CaseTag.IVb),  # (1-0.6) ln 100 = 1.84 < e
            (0.5, 1.0, 10_000, CaseTag.IVb),
            (0.45, 1.1, 10_000, CaseTag.IVb),  # 0.1 ln 1e4 = 0.92
        ],
    )
    def test_table(self, r, p, n, case):
        assert dispatch_case(r, p, n) is case

    def test_line_tolerance(self):
        assert on_case_iv_line(0.3, 1.4 + 5e-13)
        assert not on_case_iv_line(0.3, 1.4 + 1e-9)
        assert not on_case_iv_line(0.25, 1.5)

    def test_iva_split_boundary(self):
        # (1 - 2r) ln n = e exactly at n = exp(e / (1 - 2r)).
        r = 0.3
        n_star = math.exp(math.e / 0.4)
        assert dispatch_case(r, 1.4, math.floor(n_star)) is CaseTag.IVb
        assert dispatch_case(r, 1.4, math.ceil(n_star)) is CaseTag.IVa

    @given(st.floats(0, 3), st.floats(1, 3), st.integers(3, 10**6))
    def test_total(self, r, p, n):
        case = dispatch_case(r, p, n)
        if p >= 1.5:
            assert case is CaseTag.I
        elif p < 1.5 - 2 * r:
            assert case is CaseTag.III
        else:
            assert case in (CaseTag.II, CaseTag.IVa, CaseTag.IVb)


class TestRearrange:
    def test_example(self):
        assert np.array_equal(rearrange([1, -3, 2]).values, [3.0, 2.0, 1.0])

    def test_read_only(self):
        v = rearrange([1.0, 2.0])
        with pytest.raises(ValueError):
            v.values[0] = 5

    def test_empty(self):
        with pytest.raises(ValueError):
            rearrange([])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_properties(self, xs):
        v = rearrange(xs).values
        assert np.all(np.diff(v) <= 0)
        assert np.all(v >= 0)
        assert sorted(v.tolist()) == sorted(abs(x) for x in xs)

    def test_rows(self):
        x = np.array([[1.0, -5.0, 2.0], [0.0, 0.5, -0.25]])
        assert np.array_equal(sorted_abs_rows(x), [[5, 2, 1], [0.5, 0.25, 0]])


class TestNumerics:
    def test_powzero(self):
        assert powzero(0.0, 0.0) == 1.0
        assert powzero(0.0, 2.0) == 0.0
        assert np.array_equal(powzero(np.array([0.0, 2.0]), 0), [1.0, 1.0])
        with pytest.raises(ValueError):
            powzero(-1.0, 2.0)
        with pytest.raises(ValueError):
            powzero(1.0, -1.0)

    def test_compensated_sum(self):
        vals = np.array([1e16, 1.0, -1e16] * 5000)
        assert compensated_sum(vals) == 5000.0

    @pytest.mark.parametrize("n", [3, 8, 9, 100, 1000, 10**6])
    def test_floor_n_over_e(self, n):
        # Exact integer comparison against the rational bound e < 2721/1001 is
        # not available, so compare with a decimal oracle.
        from decimal import Decimal, getcontext

        getcontext().prec = 50
        e = Decimal(1).exp()
        assert floor_n_over_e(n) == int(Decimal(n) / e)

    def test_bisect_increasing(self):
        root = bisect_increasing(lambda z: z / math.log(z) - 10.0, math.e**2, 1e3, rtol=1e-14)
        assert root / math.log(root) == pytest.approx(10.0, rel=1e-12)
        with pytest.raises(ValueError):
            bisect_increasing(lambda z: z - 5, 6, 7)

    def test_bisect_log(self):
        x = bisect_log(lambda c: c >= 3.7)
        assert x == pytest.approx(3.7, rel=1e-12)
        assert bisect_log(lambda c: True) == 1e-8
        assert bisect_log(lambda c: False) == 1e8

    def test_fnv(self):
        # Published FNV-1a 64-bit test vectors.
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8


@settings(max_examples=50)
@given(st.integers(3, 10**7))
def test_floor_n_over_e_property(n):
    m = floor_n_over_e(n)
    assert m <= n / math.e < m + 1
