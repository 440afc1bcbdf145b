"""Seeded Gaussian sampling and Monte Carlo estimates.

Randomness comes from numpy's counter-based Philox generator. A stream is the
pair (seed, stream_id); sample blocks use disjoint counter ranges, so every
block is reproducible on its own and results never depend on which worker
produced them. Normals come from numpy's ziggurat transform.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .core import fnv1a64, sorted_abs_rows
from .lorentz import power_weights, psi_sorted, sphere_sup

DEFAULT_SEED = 0x5EED_0001
_MASK64 = (1 << 64) - 1

# Samples x dimension held in memory per block.
BLOCK_ELEMENTS = 1 << 20


def stream_id(name: str | int) -> int:
    if isinstance(name, int):
        return name & _MASK64
    return fnv1a64(name.encode("utf-8"))


@dataclass(frozen=True)
class Stream:
    seed: int
    stream_id: int = 0

    @classmethod
    def named(cls, seed: int, name: str | int) -> "Stream":
        return cls(int(seed) & _MASK64, stream_id(name))

    def generator(self, block: int = 0) -> np.random.Generator:
        bitgen = np.random.Philox(
            key=np.array([self.seed & _MASK64, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, 0, block], dtype=np.uint64),
        )
        return np.random.Generator(bitgen)


def sample_gaussian(n: int, stream: Stream, block: int = 0) -> np.ndarray:
    return stream.generator(block).standard_normal(n)


def rows_per_block(n: int) -> int:
    return max(1, min(4096, BLOCK_ELEMENTS // n))


Statistic = Callable[[np.ndarray], np.ndarray]


def _run_blocks(args):
    n, stream, blocks, rows, samples, statistics = args
    out = {name: [] for name in statistics}
    for b in blocks:
        k = min(rows, samples - b * rows)
        x = stream.generator(b).standard_normal((k, n))
        a = sorted_abs_rows(x)
        for name, fn in statistics.items():
            v = fn(x) if getattr(fn, "wants_raw", False) else fn(a)
            out[name].append(np.asarray(v, dtype=np.float64).reshape(k, -1))
    return out


def sample_statistics(
    n: int,
    samples: int,
    seed: int,
    stream: str | int,
    statistics: Mapping[str, Statistic],
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Evaluate statistics of the sorted |X| for ``samples`` Gaussian vectors.

    Each statistic maps a (k, n) batch of non-increasing rows to k values (or a
    (k, d) array). Output is ordered by sample index and is identical for any
    ``workers``.
    """
    st = Stream.named(seed, stream)
    rows = rows_per_block(n)
    nblocks = -(-samples // rows)
    chunks: list[list[int]]
    if workers <= 1 or nblocks == 1:
        chunks = [list(range(nblocks))]
    else:
        per = -(-nblocks // (workers * 4))
        chunks = [list(range(i, min(i + per, nblocks))) for i in range(0, nblocks, per)]
    jobs = [(n, st, ch, rows, samples, dict(statistics)) for ch in chunks]
    if workers <= 1 or len(jobs) == 1:
        parts = [_run_blocks(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_blocks, jobs))
    result = {}
    for name in statistics:
        arr = np.concatenate([blk for part in parts for blk in part[name]], axis=0)
        result[name] = arr[:, 0] if arr.shape[1] == 1 else arr
    return result


@dataclass(frozen=True)
class EmpiricalEstimate:
    point: float
    ci_low: float
    ci_high: float
    samples: int
    seed: int
    statistic: str

    def __post_init__(self):
        if self.samples < 100:
            raise ValueError("at least 100 samples are required")
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValueError("point estimate outside its interval")


def median_estimate(values: np.ndarray, seed: int, statistic: str) -> EmpiricalEstimate:
    """Sample median with a distribution-free 95% order-statistic interval."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    lo = int(stats.binom.ppf(0.025, n, 0.5))
    hi = int(stats.binom.isf(0.025, n, 0.5))
    point = float(np.median(v))
    return EmpiricalEstimate(
        point, float(min(v[max(lo - 1, 0)], point)), float(max(v[min(hi, n - 1)], point)), n, seed, statistic
    )


def proportion_estimate(hits: int, samples: int, seed: int, statistic: str) -> EmpiricalEstimate:
    """Proportion with a 95% Wilson score interval."""
    ci = stats.binomtest(int(hits), int(samples)).proportion_ci(0.95, method="wilson")
    point = hits / samples
    return EmpiricalEstimate(point, min(float(ci.low), point), max(float(ci.high), point), samples, seed, statistic)


def empirical_median(
    statistic: Statistic,
    n: int,
    samples: int,
    seed: int = DEFAULT_SEED,
    *,
    stream: str = "median",
    name: str = "statistic",
    workers: int = 1,
) -> EmpiricalEstimate:
    if samples < 100:
        raise ValueError("at least 100 samples are required")
    vals = sample_statistics(n, samples, seed, stream, {name: statistic}, workers)[name]
    return median_estimate(vals, seed, name)


# -- statistics (module-level so they pickle) --------------------------------


@dataclass(frozen=True)
class PsiStatistic:
    r: float
    p: float
    root: bool = False

    def __call__(self, rows):
        v = psi_sorted(rows, self.r, self.p)
        return v ** (1.0 / self.p) if self.root else v


@dataclass(frozen=True)
class PsiGridStatistic:
    """psi(rows, r, p) for several r at one p; a single power per batch."""

    rs: tuple
    p: float

    def __call__(self, rows):
        n = rows.shape[-1]
        w = np.stack([power_weights(n, r) for r in self.rs], axis=1)
        if self.p == 0:
            return np.broadcast_to(w.sum(axis=0), (rows.shape[0], len(self.rs))).copy()
        return np.power(rows, self.p) @ w


@lru_cache(maxsize=64)
def _weight_matrix(n: int, rs: tuple) -> np.ndarray:
    w = np.stack([power_weights(n, r) for r in rs], axis=1)
    w.flags.writeable = False
    return w


@dataclass(frozen=True)
class PsiTableStatistic:
    """psi(rows, r, q) for groups ((q, (r, ...)), ...); columns in group order.

    One logarithm per batch serves every exponent, which is several times
    cheaper than a power per group at large n.
    """

    groups: tuple

    def __call__(self, rows):
        k, n = rows.shape
        with np.errstate(divide="ignore"):
            logs = np.log(np.ascontiguousarray(rows))
        cols = []
        for q, rs in self.groups:
            w = _weight_matrix(n, tuple(rs))
            if q == 0:
                cols.append(np.broadcast_to(w.sum(axis=0), (k, len(rs))))
            else:
                cols.append(np.exp(q * logs) @ w)
        return np.concatenate(cols, axis=1)


@dataclass(frozen=True)
class FirstCoordinate:
    """X_1 itself; needs the unsorted, signed sample."""

    wants_raw = True

    def __call__(self, rows):
        return rows[:, 0]


def euclidean_norm(rows):
    return np.sqrt(np.einsum("ij,ij->i", rows, rows))


def half_range(n: int) -> int:
    """Largest i with i <= (n+1)/2."""
    return (n + 1) // 2


@dataclass(frozen=True)
class EnvelopeRatio:
    """max over i <= (n+1)/2 of X_[i] / sqrt(ln(n/i) + t^2/i)."""

    n: int
    t: float

    def __call__(self, rows):
        k = half_range(self.n)
        i = np.arange(1, k + 1, dtype=np.float64)
        env = np.sqrt(np.log(self.n / i) + self.t**2 / i)
        return np.max(rows[:, :k] / env, axis=1)


@dataclass(frozen=True)
class BandRatios:
    """(min, max) over i <= (n+1)/2 of X_[i] / sqrt(ln(n/i)), plus X_[1]."""

    n: int

    def __call__(self, rows):
        k = half_range(self.n)
        i = np.arange(1, k + 1, dtype=np.float64)
        env = np.sqrt(np.log(self.n / i))
        ratio = rows[:, :k] / env
        return np.stack([ratio.min(axis=1), ratio.max(axis=1), rows[:, 0]], axis=1)


# -- order statistic envelopes ----------------------------------------------


@dataclass(frozen=True)
class EnvelopeReport:
    n: int
    t: float
    constant_used: float
    empirical_violation_prob: EmpiricalEstimate
    target: float

    @property
    def passed(self) -> bool:
        return self.empirical_violation_prob.ci_low <= self.target


def envelope_target(t: float) -> float:
    return min(1.0, 2.0 * math.exp(-t * t))


def order_stat_envelope_check(
    n: int, t: float, constant: float, samples: int, seed: int = DEFAULT_SEED, workers: int = 1
) -> EnvelopeReport:
    """Probability that X_[i] > constant * sqrt(ln(n/i) + t^2/i) for some i <= (n+1)/2."""
    if n < 3 or t < 0:
        raise ValueError("need n >= 3 and t >= 0")
    ratios = sample_statistics(n, samples, seed, f"envelope:{n}:{t!r}", {"k": EnvelopeRatio(n, t)}, workers)["k"]
    hits = int(np.count_nonzero(ratios > constant))
    est = proportion_estimate(hits, samples, seed, f"P(order statistic envelope violated, C={constant:.6g})")
    return EnvelopeReport(n, t, constant, est, envelope_target(t))


@dataclass(frozen=True)
class BandReport:
    n: int
    band: tuple[float, float]
    probability: EmpiricalEstimate
    top_ratio_median: float

    @property
    def passed(self) -> bool:
        return self.probability.ci_high >= 0.51


def simultaneous_median_band_check(
    n: int, samples: int, seed: int = DEFAULT_SEED, band: tuple[float, float] | None = None,
    constants=None, workers: int = 1,
) -> BandReport:
    """Probability that c sqrt(ln(n/i)) <= X_[i] <= C sqrt(ln(n/i)) for all i <= (n+1)/2."""
    if n < 3:
        raise ValueError("need n >= 3")
    if band is None:
        from .constants import get_constants

        fc = get_constants(constants).require("median_band")
        band = (fc.c_fit, fc.C_fit)
    vals = sample_statistics(n, samples, seed, f"band:{n}", {"b": BandRatios(n)}, workers)["b"]
    inside = (vals[:, 0] >= band[0]) & (vals[:, 1] <= band[1])
    est = proportion_estimate(int(inside.sum()), samples, seed, "P(all order statistics inside band)")
    top = float(np.median(vals[:, 2]) / math.sqrt(2 * math.log(n)))
    return BandReport(n, tuple(band), est, top)


# -- coverage of the convex sub-level set -----------------------------------


def coverage_target(t: float) -> float:
    return 2.0 * math.exp(-t * t / 2.0)


@dataclass(frozen=True)
class CoverageReport:
    estimate: EmpiricalEstimate
    target: float

    @property
    def passed(self) -> bool:
        return self.estimate.ci_low <= self.target


@dataclass(frozen=True)
class NormStatistic:
    """Evaluates a SharpNorm on sorted rows (kept picklable)."""

    sn: object

    def __call__(self, rows):
        return self.sn.evaluate_sorted(rows)


def coverage_batch(
    items: Sequence[tuple[object, object]],
    n: int,
    samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> list[CoverageReport]:
    """Coverage for several (certificate, sharp norm) pairs sharing one sample."""
    statistics = {}
    keys = []
    for k, (cert, sn) in enumerate(items):
        if sn.params.n != n:
            raise ValueError("all items must share n")
        key = f"norm{k}"
        keys.append(key)
        statistics[key] = NormStatistic(sn)
    vals = sample_statistics(n, samples, seed, f"coverage:{n}", statistics, workers)
    out = []
    for key, (cert, sn) in zip(keys, items):
        exceed = int(np.count_nonzero(vals[key] > cert.S))
        est = proportion_estimate(exceed, samples, seed, "P(|X|_sharp > S)")
        out.append(CoverageReport(est, coverage_target(cert.params.t)))
    return out


def coverage_check(params, cert, sn, samples: int, seed: int = DEFAULT_SEED, workers: int = 1) -> CoverageReport:
    return coverage_batch([(cert, sn)], params.n, samples, seed, workers)[0]


# -- sharpness of the Euclidean-ball inclusion ------------------------------


@dataclass
class SharpnessProfile:
    params: object
    b: float
    samples: int
    seed: int
    inclusion_violations: int
    median: float
    t_grid: list[float]
    tails: list[float]
    euclid_tails: list[float]
    flagged: list[float]
    sigma: float
    intercept: float

    @property
    def tails_monotone(self) -> bool:
        return all(a >= b for a, b in zip(self.tails, self.tails[1:]))


@dataclass(frozen=True)
class _RootAndEuclid:
    r: float
    q: float

    def __call__(self, rows):
        return np.stack([psi_sorted(rows, self.r, self.q) ** (1.0 / self.q), euclidean_norm(rows)], axis=1)


# Tail estimates resting on fewer hits than this are flagged, not fitted.
MIN_TAIL_HITS = 10


def fit_tail_slope(
    t_grid: Sequence[float], tails: Sequence[float], samples: int | None = None
) -> tuple[float, float, list[float]]:
    """Line of -ln(tail) against t^2 over well-populated tails.

    With ``samples`` known the fit is weighted by sqrt(hits), the inverse
    standard error of a log frequency, so sparsely hit points barely move it.
    """
    floor = MIN_TAIL_HITS / samples if samples else 0.0
    xs, ys, ws, flagged = [], [], [], []
    for t, tail in zip(t_grid, tails):
        if tail <= 0 or tail < floor:
            flagged.append(t)
            continue
        xs.append(t * t)
        ys.append(-math.log(tail))
        ws.append(math.sqrt(tail * samples) if samples else 1.0)
    if len(xs) < 2:
        return math.nan, math.nan, flagged
    slope, intercept = np.polyfit(np.asarray(xs), np.asarray(ys), 1, w=np.asarray(ws))
    return float(slope), float(intercept), flagged


def sharpness_profile(
    params, t_grid: Sequence[float], samples: int, seed: int = DEFAULT_SEED, workers: int = 1
) -> SharpnessProfile:
    """Inclusion of the Lorentz ball in the Euclidean ball of radius/b, and tail shape.

    The pointwise check is psi(X, 2r, 2(p-1))**(1/(2(p-1))) <= b |X| with b the
    sphere supremum. The tail is sampled at u = median + t b and the slope of
    -ln P(L >= u) against t^2 is fitted.
    """
    if params.p <= 1:
        raise ValueError("sharpness profile requires p > 1")
    q = params.alpha
    r2 = 2 * params.r
    b = sphere_sup(params.n, r2, q)
    stream = f"sharpness:{params.n}:{r2!r}:{q!r}"
    vals = sample_statistics(params.n, samples, seed, stream, {"v": _RootAndEuclid(r2, q)}, workers)["v"]
    lq, eu = vals[:, 0], vals[:, 1]
    violations = int(np.count_nonzero(lq > b * eu * (1 + 1e-12)))
    med = float(np.median(lq))
    tails, euclid = [], []
    for t in t_grid:
        u = med + t * b
        tails.append(float(np.count_nonzero(lq >= u)) / samples)
        euclid.append(float(np.count_nonzero(b * eu >= 1.01 * u)) / samples)
    sigma, intercept, flagged = fit_tail_slope(t_grid, tails, samples)
    return SharpnessProfile(
        params, b, samples, seed, violations, med, list(t_grid), tails, euclid, flagged, sigma, intercept
    )
