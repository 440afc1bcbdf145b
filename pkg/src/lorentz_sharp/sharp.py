"""Convex norms |.|_sharp whose balls sit inside sub-level sets of psi.

For each case of the construction this module builds the coefficient sequence
of |.|_sharp, the exact Holder factor F with

    psi(x, 2r, 2(p-1)) <= F * |x|_sharp ** (2(p-1))    for every x,

and certificates (S, R) for the implication |x|_sharp <= S => psi <= R, either
from the asymptotic formulas with fitted constants ("paper" mode) or from
finite sums plus a Monte Carlo median ("exact" mode).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .constants import ConstantsTable, get_constants
from .core import CaseTag, Params, bisect_increasing, floor_n_over_e, fnv1a64
from .lorentz import power_weights, psi_sorted, sphere_sup
from .montecarlo import (
    DEFAULT_SEED,
    EmpiricalEstimate,
    NormStatistic,
    median_estimate,
    sample_statistics,
)

MEDIAN_SAMPLES = 10_000
IMPLICATION_SLACK = 1e-9


class MonotonicityError(ValueError):
    def __init__(self, index: int, message: str = ""):
        super().__init__(message or f"coefficients increase at index {index}")
        self.index = index


class CaseIVaRangeError(ValueError):
    pass


def peel_constant(n: int) -> float:
    """n / floor(n/e): a non-increasing sum over 1..n is at most this times its head."""
    return n / floor_n_over_e(n)


def _log_ratio(n: int, m: int) -> np.ndarray:
    i = np.arange(1, m + 1, dtype=np.float64)
    return np.log(n / i)


# -- Case IVa internals ------------------------------------------------------


@dataclass(frozen=True)
class CaseIVInternals:
    A: float
    A0: float
    K: float
    beta: np.ndarray
    n: int
    r: float
    p: float

    def residual(self) -> float:
        """Relative residual of A0 ln(n/A0) A**(1/(p-1)) = 1."""
        return abs(self.A0 * math.log(self.n / self.A0) * self.A ** (1 / (self.p - 1)) - 1.0)

    def a0_in_range(self) -> bool:
        n = self.n
        return n ** (1 - 3 / (2 * math.e)) <= self.A0 * (1 + 1e-12) and self.A0 <= n / math.e**2 * (1 + 1e-12)

    def logs_sandwich(self) -> tuple[float, float, float]:
        lk = math.log(self.K)
        return lk, math.log(self.n / self.A0), lk / (1 - 1 / math.e)

    def logs_ok(self) -> bool:
        lo, mid, hi = self.logs_sandwich()
        return lo <= mid * (1 + 1e-12) and mid <= hi * (1 + 1e-12)

    def scaled_beta(self) -> np.ndarray:
        i = np.arange(1, len(self.beta) + 1, dtype=np.float64)
        return i ** (2 * self.r / (3 - 2 * self.p)) * self.beta

    def scaled_beta_monotone(self) -> bool:
        g = self.scaled_beta()
        return bool(np.all(np.diff(g) >= -1e-12 * g[1:]))

    def piecewise_ok(self) -> bool:
        """beta_i**-1 <= min(A**-1 i**2r ln(n/i)**-(p-1), i)."""
        m = len(self.beta)
        i = np.arange(1, m + 1, dtype=np.float64)
        cap = np.minimum(i ** (2 * self.r) * _log_ratio(self.n, m) ** (-(self.p - 1)) / self.A, i)
        return bool(np.all(1.0 / self.beta <= cap * (1 + 1e-12)))


def case_iva_scale(n: int, r: float, p: float) -> float:
    return (1 - 2 * r) ** p * math.log(n) / n ** (1 - 2 * r)


def case_iva_beta(n: int, r: float, p: float) -> np.ndarray:
    m = floor_n_over_e(n)
    i = np.arange(1, m + 1, dtype=np.float64)
    A = case_iva_scale(n, r, p)
    return A * i ** (-2 * r) * _log_ratio(n, m) ** (p - 1) + 1.0 / i


def compute_case_iv_internals(params: Params) -> CaseIVInternals:
    if params.case is not CaseTag.IVa:
        raise ValueError(f"Case IVa parameters required, got case {params.case}")
    n, r, p = params.n, params.r, params.p
    A = case_iva_scale(n, r, p)
    K = A ** (1 / (p - 1)) * n
    ln = math.log(n)
    lo_z, hi_z = math.e**2, n ** (3 / (2 * math.e))
    if not (math.e**2 / 2 <= K <= hi_z / math.log(hi_z)):
        raise CaseIVaRangeError(
            f"outside Case IVa validity (n <= n0 regime): A^(1/(p-1)) n = {K:.6g} not in "
            f"[{math.e**2 / 2:.6g}, {2 * math.e / (3 * ln) * hi_z:.6g}]"
        )
    z = bisect_increasing(lambda s: s / math.log(s) - K, lo_z, hi_z, rtol=1e-14)
    return CaseIVInternals(A, n / z, K, case_iva_beta(n, r, p), n, r, p)


# -- the norms ---------------------------------------------------------------

WEIGHTED = "weighted"
LORENTZ = "lorentz"
EUCLIDEAN = "euclidean"


@dataclass(frozen=True, eq=False)
class SharpNorm:
    """|x|_sharp for one parameter point.

    ``weighted``: sum_{i<=m} coeffs[i] x_[i]; ``lorentz``: the (2r, 2(p-1))
    Lorentz norm with coeffs i**(-2r); ``euclidean``: |x|_2 with unit coeffs.
    """

    params: Params
    case: CaseTag
    kind: str
    coeffs: np.ndarray

    def evaluate_sorted(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if self.kind == WEIGHTED:
            return rows[..., : len(self.coeffs)] @ self.coeffs
        if self.kind == EUCLIDEAN:
            return np.sqrt(np.sum(rows * rows, axis=-1))
        a = self.params.alpha
        return psi_sorted(rows, 2 * self.params.r, a) ** (1.0 / a)

    def __call__(self, x) -> float:
        x = np.abs(np.asarray(x, dtype=np.float64).ravel())
        if len(x) != self.params.n:
            raise ValueError(f"expected a vector of length {self.params.n}")
        return float(self.evaluate_sorted(np.sort(x)[::-1]))

    def evaluate_profiles(self, batch) -> np.ndarray:
        from .stress import euclidean_profiles, psi_profiles, weighted_profile_sum

        if self.kind == WEIGHTED:
            return weighted_profile_sum(batch, self.coeffs, 1.0)
        if self.kind == EUCLIDEAN:
            return euclidean_profiles(batch)
        a = self.params.alpha
        return psi_profiles(batch, 2 * self.params.r, a) ** (1.0 / a)

    def holder_dual_weights(self) -> np.ndarray:
        """v_i with psi restricted to the support <= |x|_sharp^alpha (sum v_i)^(3-2p)."""
        if self.kind != WEIGHTED:
            raise ValueError("only defined for weighted-sum norms")
        a = self.params.alpha
        i = np.arange(1, len(self.coeffs) + 1, dtype=np.float64)
        return (i ** (-2 * self.params.r) * self.coeffs ** (-a)) ** (1.0 / (1.0 - a))

    @cached_property
    def digest(self) -> str:
        return f"{fnv1a64(np.ascontiguousarray(self.coeffs, dtype='<f8').tobytes()):016x}"


def _check_monotone(coeffs: np.ndarray) -> None:
    bad = np.nonzero(coeffs[1:] > coeffs[:-1] * (1 + 1e-12))[0]
    if len(bad):
        raise MonotonicityError(int(bad[0]) + 2)


def build_sharp_norm(params: Params) -> SharpNorm:
    n, r, p, t = params.n, params.r, params.p, params.t
    case = params.case
    if case is CaseTag.I:
        coeffs = np.array(power_weights(n, 2 * r))
        return SharpNorm(params, case, LORENTZ, coeffs)
    if case is CaseTag.IVb:
        return SharpNorm(params, case, EUCLIDEAN, np.ones(n))
    if case is CaseTag.III:
        coeffs = np.array(power_weights(n, 2 * r))
    elif case is CaseTag.II:
        m = floor_n_over_e(n)
        i = np.arange(1, m + 1, dtype=np.float64)
        coeffs = i ** (-2 * r) * (_log_ratio(n, m) + t * t / i) ** (-(3 - 2 * p) / 2)
    else:
        m = floor_n_over_e(n)
        i = np.arange(1, m + 1, dtype=np.float64)
        beta = case_iva_beta(n, r, p)
        coeffs = beta ** (-(3 - 2 * p) / (2 * (p - 1))) * i ** (-r / (p - 1))
    if not np.all(coeffs > 0):
        raise ValueError("coefficients must be positive")
    _check_monotone(coeffs)
    coeffs.flags.writeable = False
    return SharpNorm(params, case, WEIGHTED, coeffs)


def _case_ii_T(n: int, r: float, p: float, t: float) -> float:
    m = floor_n_over_e(n)
    i = np.arange(1, m + 1, dtype=np.float64)
    return math.fsum(i ** (-2 * r) * (_log_ratio(n, m) + t * t / i) ** (p - 1))


def degenerate_constant(params: Params) -> float:
    """psi(x, 2r, 0) = sum i**(-2r) for every x."""
    return math.fsum(power_weights(params.n, 2 * params.r))


def holder_factor(params: Params, sn: SharpNorm | None = None) -> float:
    """Exact F with psi(x, 2r, 2(p-1)) <= F |x|_sharp**(2(p-1)) for all x.

    At p = 1 psi is the constant sum i**(-2r), which is returned.
    """
    case = params.case
    if sn is not None and sn.case is not case:
        raise ValueError("sharp norm does not match the parameters")
    n, r, p = params.n, params.r, params.p
    if params.degenerate:
        return degenerate_constant(params)
    if case is CaseTag.I:
        return 1.0
    if case is CaseTag.III:
        return math.fsum(power_weights(n, 2 * r)) ** (3 - 2 * p)
    if case is CaseTag.IVb:
        return math.fsum(power_weights(n, 2 * r / (2 - p))) ** (2 - p)
    if case is CaseTag.II:
        return peel_constant(n) * _case_ii_T(n, r, p, params.t) ** (3 - 2 * p)
    return peel_constant(n) * math.fsum(case_iva_beta(n, r, p)) ** (3 - 2 * p)


def sharp_lipschitz(sn: SharpNorm) -> float:
    """Lipschitz constant of |.|_sharp with respect to the Euclidean norm."""
    if sn.kind == WEIGHTED:
        return float(np.sqrt(np.sum(sn.coeffs**2)))
    if sn.kind == EUCLIDEAN:
        return 1.0
    return sphere_sup(sn.params.n, 2 * sn.params.r, sn.params.alpha)


# -- paper-mode formulas -----------------------------------------------------


def _case_i_A(n, r, p, C):
    ln = math.log(n)
    if r <= 0.5:
        return C**p * p**p * n ** (1 - 2 * r) * ln**p / (p + (1 - 2 * r) * ln) ** p
    return C**p * ln**p / (1 + (2 * r - 1) * ln) + C**p * ln ** (p - 1)


def _case_i_B(n, r, p, C):
    if p >= 2:
        return C**p
    ln = math.log(n)
    g = 2 - 2 * r - p
    return C * (1 + (ln / (1 + abs(g) * ln)) ** (2 - p) * (1 + n**g))


def _iii_slope(n, r):
    ln = math.log(n)
    return n ** ((1 - 4 * r) / 2) * math.sqrt(ln / (1 + (1 - 4 * r) * ln))


def _iva_terms(n, r, p):
    ln = math.log(n)
    head = (1 - 2 * r) ** (-p / (2 * (p - 1))) * ln ** (-(3 - 2 * p) / (2 * (p - 1))) * math.sqrt(n)
    return head, math.sqrt(ln)


def paper_S(params: Params, C: float) -> float:
    n, r, p, t = params.n, params.r, params.p, params.t
    case = params.case
    if case is CaseTag.I:
        a = params.alpha
        return (_case_i_A(n, r, p, C) + _case_i_B(n, r, p, C) * t**a) ** (1 / a)
    if case is CaseTag.II:
        return C * _case_ii_T(n, r, p, t)
    if case is CaseTag.III:
        return C * n ** (1 - 2 * r) + C * _iii_slope(n, r) * t
    if case is CaseTag.IVa:
        head, slope = _iva_terms(n, r, p)
        return C ** (1 / (p - 1)) * (head + slope * t)
    return C * math.sqrt(n) + t


def paper_F(params: Params, C: float) -> float:
    n, r, p = params.n, params.r, params.p
    case = params.case
    if case is CaseTag.I:
        return 1.0
    if case is CaseTag.II:
        return C * _case_ii_T(n, r, p, params.t) ** (3 - 2 * p)
    if case is CaseTag.III:
        return C * n ** ((1 - 2 * r) * (3 - 2 * p))
    if case is CaseTag.IVa:
        return C * math.log(n) ** (3 - 2 * p)
    return C * math.log(n)


def paper_R_simple(params: Params, C: float) -> float:
    """The simplified right-hand sides "R <= ..." of Cases II to IVb."""
    n, r, p, t = params.n, params.r, params.p, params.t
    a = params.alpha
    ln = math.log(n)
    case = params.case
    if case is CaseTag.II:
        if r <= 0.5:
            head = n ** (1 - 2 * r) * ln**p / (1 + (1 - 2 * r) * ln) ** p
        else:
            head = ln**p / (1 + (2 * r - 1) * ln) + ln ** (p - 1)
        g = 2 - 2 * r - p
        return C * head + C * (1 + (1 + n**g) / (1 + abs(g) * ln) * ln) * t**a
    if case is CaseTag.III:
        return C * n ** (1 - 2 * r) + C * n ** (2 - 2 * r - p) * (ln / (1 + (1 - 4 * r) * ln)) ** (p - 1) * t**a
    if case is CaseTag.IVa:
        return C * n ** (1 - 2 * r) / (1 - 2 * r) + C * ln ** (2 - p) * t**a
    if case is CaseTag.IVb:
        return C * ln * t**a
    raise ValueError("Case I has no simplified form")


def iva_chained_median(params: Params, sn: SharpNorm) -> float:
    """Integral-style median estimate sum_i w_i (ln(n/i))**(1/2)."""
    m = len(sn.coeffs)
    return float(np.sum(sn.coeffs * np.sqrt(_log_ratio(params.n, m))))


def remark_threshold_t(params: Params, constants: ConstantsTable | None = None) -> float:
    """t at which the t-term of the paper-mode S is ten times its constant term."""
    n, r, p = params.n, params.r, params.p
    case = params.case
    if case is CaseTag.I:
        C = get_constants(constants).require("theorem_I_S").C_fit
        a = params.alpha
        return (10 * _case_i_A(n, r, p, C) / _case_i_B(n, r, p, C)) ** (1 / a)
    if case is CaseTag.II:
        base = _case_ii_T(n, r, p, 0.0) if p > 1 else float(floor_n_over_e(n))
        f = lambda s: _case_ii_T(n, r, p, s) - 11 * base
        hi = 1.0
        while f(hi) < 0:
            hi *= 2
        return bisect_increasing(f, 0.0, hi)
    if case is CaseTag.III:
        return 10 * n ** (1 - 2 * r) / _iii_slope(n, r)
    if case is CaseTag.IVa:
        head, slope = _iva_terms(n, r, p)
        return 10 * head / slope
    C = get_constants(constants).require("theorem_IVb_S").C_fit
    return 10 * C * math.sqrt(n)


# -- certificates ------------------------------------------------------------


def coverage_tail(t: float) -> float:
    return 2.0 * math.exp(-t * t / 2.0)


@dataclass
class BoundCertificate:
    params: Params
    case: CaseTag
    mode: str
    S: float
    R: float
    holder_factor: float
    tail_bound: float
    degenerate: bool = False
    median: EmpiricalEstimate | None = None
    lipschitz: float = math.nan
    coeffs_digest: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.S > 0 and self.R > 0 and self.holder_factor > 0):
            raise ValueError("S, R and the Holder factor must be positive")

    def as_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None

        out = {
            "case": str(self.case),
            **self.params.as_dict(),
            "mode": self.mode,
            "S": num(self.S),
            "R": num(self.R),
            "holder_factor": self.holder_factor,
            "coeffs_digest": self.coeffs_digest,
            "tail_bound": self.tail_bound,
            "degenerate": self.degenerate,
            "lipschitz": num(self.lipschitz),
        }
        if self.median is not None:
            out["median"] = {
                "point": self.median.point,
                "ci_low": self.median.ci_low,
                "ci_high": self.median.ci_high,
                "samples": self.median.samples,
                "seed": self.median.seed,
            }
        if self.details:
            out["details"] = self.details
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, allow_nan=False)


def median_stream(n: int) -> str:
    return f"median:{n}"


def sharp_medians(
    norms: Sequence[SharpNorm], samples: int = MEDIAN_SAMPLES, seed: int = DEFAULT_SEED, workers: int = 1
) -> list[EmpiricalEstimate]:
    """Monte Carlo medians of |X|_sharp; norms sharing n share one sample.

    Norms with identical coefficients (most cases do not depend on t) are
    evaluated once.
    """
    keys = [(sn.params.n, sn.kind, sn.digest, sn.params.alpha) for sn in norms]
    unique: dict[tuple, SharpNorm] = {}
    for key, sn in zip(keys, norms):
        unique.setdefault(key, sn)
    by_n: dict[int, list[tuple]] = {}
    for key in unique:
        by_n.setdefault(key[0], []).append(key)
    found: dict[tuple, EmpiricalEstimate] = {}
    for n, ks in by_n.items():
        stats = {f"s{j}": NormStatistic(unique[k]) for j, k in enumerate(ks)}
        vals = sample_statistics(n, samples, seed, median_stream(n), stats, workers)
        for j, k in enumerate(ks):
            found[k] = median_estimate(vals[f"s{j}"], seed, "median |X|_sharp")
    return [found[k] for k in keys]


def _degenerate_certificate(params: Params, sn: SharpNorm, mode: str) -> BoundCertificate:
    c = degenerate_constant(params)
    return BoundCertificate(
        params, params.case, mode, math.inf, c, c, coverage_tail(params.t),
        degenerate=True, lipschitz=sharp_lipschitz(sn), coeffs_digest=sn.digest,
    )


def certificate(
    params: Params,
    mode: str = "exact",
    *,
    samples: int = MEDIAN_SAMPLES,
    seed: int = DEFAULT_SEED,
    constants: ConstantsTable | None = None,
    workers: int = 1,
    median: EmpiricalEstimate | None = None,
    sn: SharpNorm | None = None,
) -> BoundCertificate:
    """(S, R) for one parameter point.

    exact: S = median + t Lip and R = F S**(2(p-1)); paper: the closed forms
    with fitted constants. ``median`` may be passed in to reuse a shared sample.
    """
    if mode not in ("exact", "paper"):
        raise ValueError(f"unknown mode {mode!r}")
    sn = sn or build_sharp_norm(params)
    if params.degenerate:
        return _degenerate_certificate(params, sn, mode)
    a = params.alpha
    lip = sharp_lipschitz(sn)
    if mode == "exact":
        if median is None:
            median = sharp_medians([sn], samples, seed, workers)[0]
        S = median.point + params.t * lip
        F = holder_factor(params, sn)
        return BoundCertificate(
            params, params.case, mode, S, F * S**a, F, coverage_tail(params.t),
            median=median, lipschitz=lip, coeffs_digest=sn.digest,
        )
    table = get_constants(constants)
    case = params.case
    S = paper_S(params, table.require(f"theorem_{case}_S").C_fit)
    F = 1.0 if case is CaseTag.I else paper_F(params, table.require(f"theorem_{case}_F").C_fit)
    details = {}
    if case is not CaseTag.I:
        details["R_simple"] = paper_R_simple(params, table.require(f"theorem_{case}_Rsimple").C_fit)
    if case is CaseTag.IVa:
        details["chained_median"] = iva_chained_median(params, sn)
    return BoundCertificate(
        params, case, mode, S, F * S**a, F, coverage_tail(params.t),
        lipschitz=lip, coeffs_digest=sn.digest, details=details,
    )


def exact_certificates(
    points: Sequence[Params], samples: int = MEDIAN_SAMPLES, seed: int = DEFAULT_SEED, workers: int = 1
) -> list[tuple[BoundCertificate, SharpNorm]]:
    norms = [build_sharp_norm(pt) for pt in points]
    live = [k for k, pt in enumerate(points) if not pt.degenerate]
    meds = sharp_medians([norms[k] for k in live], samples, seed, workers)
    med_of = dict(zip(live, meds))
    return [
        (certificate(pt, "exact", median=med_of.get(k), sn=norms[k], samples=samples, seed=seed), norms[k])
        for k, pt in enumerate(points)
    ]


# -- implication checks ------------------------------------------------------


def _implication_mask(norm_vals, psi_vals, cert: BoundCertificate) -> np.ndarray:
    return (norm_vals > cert.S) | (psi_vals <= cert.R * (1 + IMPLICATION_SLACK))


def implication_check(x, cert: BoundCertificate, sn: SharpNorm) -> bool:
    """|x|_sharp <= S implies psi(x, 2r, 2(p-1)) <= R (up to 1e-9 relative)."""
    a = np.sort(np.abs(np.asarray(x, dtype=np.float64).ravel()))[::-1]
    return bool(implication_check_sorted(a[None, :], cert, sn)[0])


def implication_check_sorted(rows: np.ndarray, cert: BoundCertificate, sn: SharpNorm) -> np.ndarray:
    p = sn.params
    return _implication_mask(sn.evaluate_sorted(rows), psi_sorted(rows, 2 * p.r, p.alpha), cert)


def implication_check_profiles(batch, cert: BoundCertificate, sn: SharpNorm) -> np.ndarray:
    from .stress import psi_profiles

    p = sn.params
    return _implication_mask(sn.evaluate_profiles(batch), psi_profiles(batch, 2 * p.r, p.alpha), cert)


def holder_ratios(batch, sn: SharpNorm, F: float) -> np.ndarray:
    """psi / (F |x|_sharp**alpha) per profile; nan where both vanish."""
    from .stress import psi_profiles

    p = sn.params
    lhs = psi_profiles(batch, 2 * p.r, p.alpha)
    rhs = F * sn.evaluate_profiles(batch) ** p.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where((lhs == 0) & (rhs == 0), np.nan, lhs / rhs)


# -- optimality probe for the Case IVa weights --------------------------------


@dataclass
class LagrangeReport:
    params: Params
    perturbations: int
    baseline: float
    worst_ratio: float
    zero_ratio: float
    homogeneity_ratio: float
    slack: float = 4.0

    @property
    def passed(self) -> bool:
        return self.worst_ratio >= 1.0 / self.slack


def _iva_bound_values(beta_cols: np.ndarray, top: np.ndarray, params: Params) -> np.ndarray:
    """(sum beta)^(3-2p) (median + t Lip)^(2(p-1)) for each column of beta."""
    r, p = params.r, params.p
    m = beta_cols.shape[0]
    i = np.arange(1, m + 1, dtype=np.float64)[:, None]
    w = beta_cols ** (-(3 - 2 * p) / (2 * (p - 1))) * i ** (-r / (p - 1))
    med = np.median(top @ w, axis=0)
    lip = np.sqrt(np.sum(w * w, axis=0))
    return np.sum(beta_cols, axis=0) ** (3 - 2 * p) * (med + params.t * lip) ** (2 * (p - 1))


def lagrange_stationarity_probe(
    params: Params, perturbations: int = 1000, samples: int = 1000, seed: int = DEFAULT_SEED, batch: int = 250
) -> LagrangeReport:
    """Random multiplicative perturbations of beta must not improve the bound by 4x.

    Perturbations act on g_i = i**(2r/(3-2p)) beta_i followed by a running
    maximum, which keeps the coefficients non-increasing. Common random numbers
    are used for every candidate.
    """
    internals = compute_case_iv_internals(params)
    beta = internals.beta
    m = len(beta)
    top = sample_statistics(params.n, samples, seed, f"lagrange:{params.n}", {"x": _Head(m)})["x"]
    base = float(_iva_bound_values(beta[:, None], top, params)[0])
    zero = float(_iva_bound_values(beta[:, None].copy(), top, params)[0]) / base
    homog = float(_iva_bound_values(3.7 * beta[:, None], top, params)[0]) / base
    i = np.arange(1, m + 1, dtype=np.float64)
    g = internals.scaled_beta()
    scale = i ** (-2 * params.r / (3 - 2 * params.p))
    rng = np.random.Generator(np.random.Philox(key=[seed, 0x1A6]))
    worst = math.inf
    for start in range(0, perturbations, batch):
        k = min(batch, perturbations - start)
        eps = rng.uniform(-0.1, 0.1, size=(m, k))
        gp = np.maximum.accumulate(g[:, None] * (1 + eps), axis=0)
        vals = _iva_bound_values(gp * scale[:, None], top, params)
        worst = min(worst, float(np.min(vals)) / base)
    return LagrangeReport(params, perturbations, base, worst, zero, homog)


@dataclass(frozen=True)
class _Head:
    m: int

    def __call__(self, rows):
        return rows[:, : self.m]
