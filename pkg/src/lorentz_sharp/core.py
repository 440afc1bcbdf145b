"""Parameter validation, case dispatch, rearrangement and shared numerics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Below this length plain float64 summation is accurate enough.
COMPENSATED_SUM_THRESHOLD = 10_000

# Tolerance used to decide that p lies on the line p = 2(1 - r).
CASE_IV_LINE_TOL = 1e-12


class CaseTag(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IVa = "IVa"
    IVb = "IVb"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Params:
    """The problem quadruple (n, r, p, t)."""

    n: int
    r: float
    p: float
    t: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        for name in ("r", "p", "t"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.n < 3:
            raise ValueError(f"n must be at least 3, got {self.n}")
        if self.r < 0:
            raise ValueError(f"r must be non-negative, got {self.r}")
        if self.p < 1:
            raise ValueError(f"p must be at least 1, got {self.p}")
        if self.t <= 0:
            raise ValueError(f"t must be positive, got {self.t}")

    @property
    def case(self) -> CaseTag:
        return dispatch_case(self.r, self.p, self.n)

    @property
    def alpha(self) -> float:
        """Exponent 2(p - 1) of the order statistics in the target sum."""
        return 2.0 * (self.p - 1.0)

    @property
    def degenerate(self) -> bool:
        return self.p == 1.0

    def as_dict(self) -> dict:
        return {"n": self.n, "r": self.r, "p": self.p, "t": self.t}


@dataclass(frozen=True, eq=False)
class SortedAbsVector:
    """Non-increasing rearrangement of absolute values."""

    values: np.ndarray

    def __post_init__(self):
        self.values.flags.writeable = False

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SortedAbsVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)


def rearrange(x) -> SortedAbsVector:
    """Return |x| sorted non-increasingly."""
    arr = np.abs(np.asarray(x, dtype=np.float64).ravel())
    if arr.size == 0:
        raise ValueError("empty vector")
    return SortedAbsVector(np.sort(arr)[::-1].copy())


def sorted_abs_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise non-increasing rearrangement of |x| for a 2-D batch."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    a.sort(axis=-1)
    return a[..., ::-1]


def on_case_iv_line(r: float, p: float) -> bool:
    return 0.25 < r <= 0.5 and abs(p - 2.0 * (1.0 - r)) <= CASE_IV_LINE_TOL


def dispatch_case(r: float, p: float, n: int) -> CaseTag:
    """Select the case of the main construction for (r, p, n).

    p = 3/2 belongs to Case I. On the line p = 2(1 - r) with 1/4 < r <= 1/2,
    Case IV wins over Case II; the split between IVa and IVb is
    (1 - 2r) ln n >= e.
    """
    if p >= 1.5:
        return CaseTag.I
    if p < 1.5 - 2.0 * r:
        return CaseTag.III
    if on_case_iv_line(r, p):
        if (1.0 - 2.0 * r) * math.log(n) >= math.e:
            return CaseTag.IVa
        return CaseTag.IVb
    return CaseTag.II


def powzero(x, q):
    """x**q for x >= 0, q >= 0, with 0**0 = 1. Works elementwise on arrays."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < 0):
        raise ValueError("powzero requires a non-negative base")
    if np.any(np.asarray(q) < 0):
        raise ValueError("powzero requires a non-negative exponent")
    # IEEE pow already maps 0**0 to 1; spelled out so the convention is explicit.
    out = np.where(np.asarray(q) == 0, 1.0, np.power(xa, q))
    if np.ndim(out) == 0:
        return float(out)
    return out


def compensated_sum(values) -> float:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size > COMPENSATED_SUM_THRESHOLD:
        return math.fsum(arr.tolist())
    return float(np.sum(arr))


def floor_n_over_e(n: int) -> int:
    """Number of indices i in N with 1 <= i <= n/e."""
    m = int(math.floor(n / math.e))
    # n/e is never an integer, but guard against float rounding.
    while (m + 1) <= n / math.e:
        m += 1
    while m > 0 and m > n / math.e:
        m -= 1
    return m


def bisect_increasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    rtol: float = 1e-12,
    max_iter: int = 400,
) -> float:
    """Root of an increasing function on [lo, hi] by bisection.

    Raises ValueError when the bracket does not contain a sign change.
    """
    flo, fhi = f(lo), f(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * abs(mid):
            return mid
        fm = f(mid)
        if fm == 0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisect_log(
    pred: Callable[[float], bool],
    lo: float = 1e-8,
    hi: float = 1e8,
    *,
    iters: int = 200,
) -> float:
    """Smallest x in [lo, hi] with pred(x) true, for pred monotone in x.

    Searches on a log scale; returns hi if pred(hi) is false and lo if
    pred(lo) is already true.
    """
    if pred(lo):
        return lo
    if not pred(hi):
        return hi
    a, b = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if pred(math.exp(mid)):
            b = mid
        else:
            a = mid
        if b - a < 1e-15:
            break
    return math.exp(b)


FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h
