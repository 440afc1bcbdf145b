"""Two-sided closed-form estimates with exact-sum and quadrature oracles.

Each envelope has the shape ``lower(c) <= value <= upper(C)`` where ``c, C``
are universal constants taken from the frozen constants table. The
``*_lower`` / ``*_upper`` functions expose the envelopes as functions of the
constant so that the fitting code and the bound code share one formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .constants import ConstantsTable, get_constants
from .core import compensated_sum, powzero

QUAD_RTOL = 1e-10


class QuadratureError(ArithmeticError):
    def __init__(self, achieved: float, message: str = ""):
        super().__init__(message or f"quadrature did not converge (achieved rel. tol {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class TwoSidedBound:
    lower: float
    upper: float
    normalization_exponent: float = 1.0

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper):
            raise ValueError(f"invalid bound [{self.lower}, {self.upper}]")

    def contains(self, value: float, rtol: float = 0.0) -> bool:
        return self.lower * (1 - rtol) <= value <= self.upper * (1 + rtol)

    @property
    def width(self) -> float:
        """Ratio upper/lower raised to 1/normalization_exponent."""
        if self.lower == 0:
            return math.inf
        return (self.upper / self.lower) ** (1.0 / self.normalization_exponent)


def _sign(sign) -> int:
    if sign in ("+", 1, "plus"):
        return 1
    if sign in ("-", -1, "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def _quad(f, a, b, points=None) -> float:
    val, err = integrate.quad(
        f, a, b, epsabs=0.0, epsrel=QUAD_RTOL / 10, limit=500, points=points
    )
    achieved = err / abs(val) if val != 0 else err
    if achieved > QUAD_RTOL:
        raise QuadratureError(achieved)
    return val


def incomplete_gamma_quadrature(b: float, q: float, sign="-") -> float:
    """Integral of exp(-+w) w**q over [0, b].

    Adaptive quadrature to relative 1e-10. For q < 1 the substitution
    w = u**(1/(1+q)) removes the w**q singularity at 0. With the plus sign and
    an integer q <= b the integral is computed by the recurrence
    I_k = e^b b^k - k I_{k-1}, which is forward-stable in that regime.
    """
    s = _sign(sign)
    b = float(b)
    q = float(q)
    if b < 0 or q < 0:
        raise ValueError("b and q must be non-negative")
    if b == 0:
        return 0.0
    if s > 0 and q == int(q) and b >= q:
        acc = math.expm1(b)
        eb = math.exp(b)
        for k in range(1, int(q) + 1):
            acc = eb * b**k - k * acc
        return acc
    if q < 1:
        k = 1.0 / (1.0 + q)
        upper = b ** (1.0 + q)
        if s < 0:
            return k * _quad(lambda u: math.exp(-(u**k)), 0.0, upper)
        # scale by e^b to keep the integrand <= 1
        return k * math.exp(b) * _quad(lambda u: math.exp(u**k - b), 0.0, upper)
    if s < 0:
        m = min(q, b)
        log_peak = -m + q * math.log(m)

        def f(w):
            if w == 0.0:
                return 0.0
            return math.exp(-w + q * math.log(w) - log_peak)

        pts = [m] if 0 < m < b else None
        return math.exp(log_peak) * _quad(f, 0.0, b, points=pts)
    log_peak = b + q * math.log(b)

    def g(w):
        if w == 0.0:
            return 0.0
        return math.exp(w + q * math.log(w) - log_peak)

    return math.exp(log_peak) * _quad(g, 0.0, b)


# -- incomplete gamma envelopes ---------------------------------------------


def incomplete_gamma_core(b: float, q: float, sign="-") -> float:
    if _sign(sign) < 0:
        return min(1.0 + q, b) ** (1.0 + q)
    if b == 0:
        return 0.0
    return math.exp(b + (1.0 + q) * math.log(b)) / (1.0 + q + b)


def incomplete_gamma_exponent(q: float, sign="-") -> float:
    return 1.0 + q if _sign(sign) < 0 else 1.0


def incomplete_gamma_bounds(b: float, q: float, sign="-", constants: ConstantsTable | None = None) -> TwoSidedBound:
    """Two-sided envelope for the lower incomplete gamma integrals."""
    s = _sign(sign)
    family = "incomplete_gamma_minus" if s < 0 else "incomplete_gamma_plus"
    fc = get_constants(constants).require(family)
    e = incomplete_gamma_exponent(q, sign)
    core = incomplete_gamma_core(b, q, sign)
    return TwoSidedBound(fc.c_fit**e * core, fc.C_fit**e * core, e)


# -- weighted logarithmic sums ----------------------------------------------


def weighted_log_sum_exact(n: int, a: float, q: float) -> float:
    """Sum over i = 1..n of i**(-a) * ln(n/i)**q, with 0**0 = 1."""
    if n < 2:
        raise ValueError("n must be at least 2")
    i = np.arange(1, n + 1, dtype=np.float64)
    logs = np.log(n / i)
    logs[-1] = 0.0
    return compensated_sum(i ** (-a) * powzero(logs, q))


def log_sum_low_core(n: int, a: float, q: float) -> float:
    ln = math.log(n)
    lg = (1 - a) * ln + (1 + q) * (math.log1p(q) + math.log(ln) - math.log((1 - a) * ln + 1 + q))
    return math.exp(lg)


def log_sum_high_terms(n: int, a: float, q: float) -> tuple[float, float]:
    """(X, Y) with upper bound C X + Y and lower bound c (X + Y)."""
    ln = math.log(n)
    x = ln ** (1 + q) / ((a - 1) * ln + 1 + q)
    y = ln**q
    return x, y


def log_sum_low_lower(n, a, q, c):
    return c ** (1 + q) * log_sum_low_core(n, a, q)


def log_sum_low_upper(n, a, q, C):
    return C ** (1 + q) * log_sum_low_core(n, a, q)


def log_sum_high_lower(n, a, q, c):
    x, y = log_sum_high_terms(n, a, q)
    return c * (x + y)


def log_sum_high_upper(n, a, q, C):
    x, y = log_sum_high_terms(n, a, q)
    return C * x + y


def weighted_log_sum_bound(
    n: int, a: float, q: float, constants: ConstantsTable | None = None, branch: str | None = None
) -> TwoSidedBound:
    """Envelope for the weighted log sum; branch 'low' (a <= 1) or 'high' (a >= 1)."""
    if n < 2 or a < 0 or q < 0:
        raise ValueError("need n >= 2, a >= 0, q >= 0")
    if branch is None:
        branch = "low" if a <= 1 else "high"
    table = get_constants(constants)
    if branch == "low":
        if a > 1:
            raise ValueError("low branch requires a <= 1")
        fc = table.require("log_sum_low")
        return TwoSidedBound(
            log_sum_low_lower(n, a, q, fc.c_fit), log_sum_low_upper(n, a, q, fc.C_fit), 1 + q
        )
    if branch == "high":
        if a < 1:
            raise ValueError("high branch requires a >= 1")
        fc = table.require("log_sum_high")
        return TwoSidedBound(
            log_sum_high_lower(n, a, q, fc.c_fit), log_sum_high_upper(n, a, q, fc.C_fit), 1.0
        )
    raise ValueError(f"unknown branch {branch!r}")


# -- power sums and integrals -----------------------------------------------


def power_sum_exact(n: int, a: float) -> float:
    """Sum over i = 1..n of i**(-a)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if a == 0:
        return float(n)
    i = np.arange(1, n + 1, dtype=np.float64)
    return compensated_sum(i ** (-a))


def power_integral_exact(a: float, T: float) -> float:
    if T < 1:
        raise ValueError("T must be >= 1")
    lt = math.log(T)
    if a == 1:
        return lt
    return math.expm1((1 - a) * lt) / (1 - a)


def power_integral_core(a: float, T: float) -> float:
    lt = math.log(T)
    return (1 + T ** (1 - a)) / (1 + abs(1 - a) * lt) * lt


def power_integral_bound(a: float, T: float, constants: ConstantsTable | None = None) -> TwoSidedBound:
    if T < 1:
        raise ValueError("T must be >= 1")
    fc = get_constants(constants).require("power_integral")
    core = power_integral_core(a, T)
    return TwoSidedBound(fc.c_fit * core, fc.C_fit * core, 1.0)


def sum_integral_sandwich_check(f, n: int | None = None, *, integral: float | None = None, resolution: int = 64) -> bool:
    """Check (f(1) + I)/2 <= sum f(i) <= f(1) + I for non-increasing f on [1, n].

    ``f`` is either a vectorised callable (with ``n`` given) or a tabulation on
    a uniform grid over [1, n] whose spacing divides 1. I defaults to the
    trapezoid rule on the tabulation.
    """
    if callable(f):
        if n is None:
            raise ValueError("n is required with a callable")
        xs = np.linspace(1.0, n, (n - 1) * resolution + 1)
        vals = np.asarray(f(xs), dtype=np.float64)
        step = resolution
    else:
        vals = np.asarray(f, dtype=np.float64)
        if n is None:
            raise ValueError("n is required with a tabulation")
        if n == 1:
            step = 1
        else:
            step, rem = divmod(len(vals) - 1, n - 1)
            if rem or step < 1:
                raise ValueError("tabulation length must be (n-1)*k + 1")
        xs = np.linspace(1.0, n, len(vals))
    diffs = np.diff(vals)
    scale = np.maximum(np.abs(vals[:-1]), 1e-300)
    if np.any(diffs > 1e-12 * scale):
        bad = int(np.argmax(diffs > 1e-12 * scale))
        raise ValueError(f"f is not non-increasing near x={xs[bad]:.6g}")
    total = compensated_sum(vals[::step])
    if integral is None:
        integral = float(np.trapezoid(vals, xs)) if n > 1 else 0.0
    f1 = float(vals[0])
    slack = 1e-12 * max(abs(total), 1.0)
    return 0.5 * (f1 + integral) <= total + slack and total <= f1 + integral + slack


# -- medians of weighted order-statistic power sums -------------------------


def median_low_core(n: int, r: float, p: float) -> float:
    ln = math.log(n)
    lg = (
        (p / 2) * math.log1p(p)
        + (1 - r) * ln
        + (1 + p / 2) * (math.log(ln) - math.log(1 + p + (1 - r) * ln))
    )
    return math.exp(lg)


def median_high_terms(n: int, r: float, p: float) -> tuple[float, float]:
    """(X, Y) with envelope C**(1+p) X + C**p Y."""
    ln = math.log(n)
    return ln ** (1 + p / 2) / (1 + (r - 1) * ln), ln ** (p / 2)


def median_low_envelope(n, r, p, c):
    return c ** (1 + p) * median_low_core(n, r, p)


def median_high_envelope(n, r, p, c):
    x, y = median_high_terms(n, r, p)
    return c ** (1 + p) * x + c**p * y


def median_formula_bound(
    n: int, r: float, p: float, constants: ConstantsTable | None = None, branch: str | None = None
) -> TwoSidedBound:
    """Envelope for the median of sum i**(-r) X_[i]**p over standard Gaussian X."""
    if n < 2 or r < 0 or p < 0:
        raise ValueError("need n >= 2, r >= 0, p >= 0")
    if branch is None:
        branch = "low" if r <= 1 else "high"
    table = get_constants(constants)
    if branch == "low":
        fc = table.require("median_low")
        return TwoSidedBound(
            median_low_envelope(n, r, p, fc.c_fit), median_low_envelope(n, r, p, fc.C_fit), 1 + p
        )
    if branch == "high":
        if r < 1:
            raise ValueError("high branch requires r >= 1")
        fc = table.require("median_high")
        return TwoSidedBound(
            median_high_envelope(n, r, p, fc.c_fit), median_high_envelope(n, r, p, fc.C_fit), 1 + p
        )
    raise ValueError(f"unknown branch {branch!r}")


def remark_median_core(n: int, r: float, p: float) -> float:
    """Simplified median scale of sum i**(-2r) X_[i]**(2(p-1)) for 1 < p < 3/2."""
    ln = math.log(n)
    if r <= 0.5:
        return n ** (1 - 2 * r) * ln**p * (1 + (1 - 2 * r) * ln) ** (-p)
    return ln**p / (1 + (2 * r - 1) * ln)


def remark_median_bound(n: int, r: float, p: float, constants: ConstantsTable | None = None) -> TwoSidedBound:
    if not (1 < p < 1.5) or not (0 <= r <= 2):
        raise ValueError("simplified median envelope needs 1 < p < 3/2 and 0 <= r <= 2")
    fc = get_constants(constants).require("remark_median")
    core = remark_median_core(n, r, p)
    return TwoSidedBound(fc.c_fit * core, fc.C_fit * core, 1.0)
