"""Stress vectors for deterministic inequality checks.

Everything checked here depends on a vector only through its non-increasing
rearrangement, so vectors are stored as run-length encoded sorted profiles:
row b holds levels v_1 >= v_2 >= ... >= v_L >= 0 and cumulative run ends
e_1 <= ... <= e_L <= n; coordinates past e_L are zero. Weighted sums then cost
O(L) per vector via prefix sums of the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import floor_n_over_e, powzero
from .lorentz import power_weights, sphere_maximizer


@dataclass
class ProfileBatch:
    n: int
    levels: np.ndarray
    ends: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.float64)
        self.ends = np.asarray(self.ends, dtype=np.int64)
        if self.levels.shape != self.ends.shape or self.levels.ndim != 2:
            raise ValueError("levels and ends must be matching 2-D arrays")

    def __len__(self) -> int:
        return self.levels.shape[0]

    @property
    def counts(self) -> np.ndarray:
        starts = np.concatenate([np.zeros((len(self), 1), np.int64), self.ends[:, :-1]], axis=1)
        return self.ends - starts

    def scaled(self, factors) -> "ProfileBatch":
        f = np.asarray(factors, dtype=np.float64).reshape(-1, 1)
        return ProfileBatch(self.n, self.levels * f, self.ends.copy(), self.label)

    def expand(self) -> np.ndarray:
        """Dense (B, n) sorted vectors; for tests on small batches."""
        out = np.zeros((len(self), self.n))
        for b in range(len(self)):
            start = 0
            for v, e in zip(self.levels[b], self.ends[b]):
                out[b, start:e] = v
                start = e
        return out

    @classmethod
    def dense(cls, rows: np.ndarray, label: str = "") -> "ProfileBatch":
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        b, n = rows.shape
        ends = np.broadcast_to(np.arange(1, n + 1, dtype=np.int64), (b, n)).copy()
        return cls(n, rows, ends, label)


def prefix(weights: np.ndarray) -> np.ndarray:
    out = np.empty(len(weights) + 1)
    out[0] = 0.0
    np.cumsum(weights, out=out[1:])
    return out


def weighted_profile_sum(batch: ProfileBatch, weights: np.ndarray, exponent: float = 1.0) -> np.ndarray:
    """sum_i weights[i] * x_[i]**exponent for every profile (0**0 = 1).

    ``weights`` may be shorter than n; missing weights are zero.
    """
    w = np.zeros(batch.n)
    w[: len(weights)] = weights[: batch.n]
    W = prefix(w)
    ends = batch.ends
    starts = np.concatenate([np.zeros((len(batch), 1), np.int64), ends[:, :-1]], axis=1)
    mass = W[ends] - W[starts]
    vals = batch.levels if exponent == 1.0 else powzero(batch.levels, exponent)
    total = np.sum(vals * mass, axis=1)
    if exponent == 0:
        total = total + (W[-1] - W[ends[:, -1]])
    return total


def psi_profiles(batch: ProfileBatch, r: float, p: float) -> np.ndarray:
    return weighted_profile_sum(batch, power_weights(batch.n, r), p)


def euclidean_profiles(batch: ProfileBatch) -> np.ndarray:
    return np.sqrt(np.sum(batch.levels**2 * batch.counts, axis=1))


# -- generators --------------------------------------------------------------


def _pad(levels_list, ends_list, n, label):
    L = max(len(v) for v in levels_list)
    lv = np.zeros((len(levels_list), L))
    en = np.zeros((len(levels_list), L), np.int64)
    for b, (v, e) in enumerate(zip(levels_list, ends_list)):
        k = len(v)
        lv[b, :k] = v
        en[b, :k] = e
        lv[b, k:] = v[-1] if k else 0.0
        en[b, k:] = e[-1] if k else 0
    return ProfileBatch(n, lv, en, label)


def random_piecewise(n: int, count: int, rng: np.random.Generator, max_levels: int = 12) -> ProfileBatch:
    """Sorted profiles with a few constant runs and magnitudes over many decades."""
    L = min(max_levels, n)
    k = rng.integers(1, L + 1, size=count)
    mags = np.exp(rng.uniform(-15, 15, size=(count, 1)) + rng.standard_normal((count, L)) * rng.uniform(0, 6, (count, 1)))
    mags = -np.sort(-mags, axis=1)
    cuts = np.sort(rng.uniform(0, 1, size=(count, L)), axis=1)
    # mix of short and long runs: warp cut points toward the start
    warp = rng.uniform(0.2, 5.0, size=(count, 1))
    ends = np.ceil((cuts**warp) * n).astype(np.int64)
    ends = np.maximum.accumulate(np.clip(ends, 1, n), axis=1)
    ends[:, -1] = np.where(rng.random(count) < 0.5, n, ends[:, -1])
    ends = np.maximum.accumulate(ends, axis=1)
    # collapse unused levels onto the last used one
    idx = np.arange(L)[None, :]
    used = idx < k[:, None]
    last = k - 1
    mags = np.where(used, mags, mags[np.arange(count), last][:, None])
    ends = np.where(used, ends, ends[np.arange(count), last][:, None])
    # a share of profiles drops to zero after the last run
    flat = rng.random(count) < 0.2
    mags[flat] = mags[flat, :1]
    return ProfileBatch(n, mags, ends, "piecewise")


def random_sparse(n: int, count: int, rng: np.random.Generator, max_support: int = 64) -> ProfileBatch:
    L = min(max_support, n)
    k = rng.integers(1, L + 1, size=count)
    vals = -np.sort(-np.abs(rng.standard_normal((count, L))), axis=1)
    idx = np.arange(L)[None, :]
    vals = np.where(idx < k[:, None], vals, 0.0)
    ends = np.broadcast_to(np.arange(1, L + 1, dtype=np.int64), (count, L)).copy()
    return ProfileBatch(n, vals, ends, "sparse")


def gaussian_full(n: int, count: int, rng: np.random.Generator) -> ProfileBatch:
    rows = np.abs(rng.standard_normal((count, n)))
    rows.sort(axis=1)
    return ProfileBatch.dense(rows[:, ::-1], "gaussian")


def extremal_profiles(sn) -> ProfileBatch:
    """Profiles at or near the equality cases of the Holder factorisations."""
    params = sn.params
    n, r, p = params.n, params.r, params.p
    alpha = params.alpha
    m = floor_n_over_e(n)
    rows = []
    rows.append(np.ones(n))
    e1 = np.zeros(n)
    e1[0] = 1.0
    rows.append(e1)
    head = np.zeros(n)
    head[:m] = 1.0
    rows.append(head)
    if 0 < alpha < 2:
        rows.append(sphere_maximizer(n, 2 * r, alpha))
    if sn.kind == "weighted" and alpha > 0:
        k = len(sn.coeffs)
        v = sn.holder_dual_weights()
        prof = v / sn.coeffs
        full = np.empty(n)
        full[:k] = prof
        full[k:] = prof[-1]
        rows.append(full)
        cut = full.copy()
        cut[k:] = 0.0
        rows.append(cut)
    if sn.kind == "euclidean":
        rows.append(np.arange(1, n + 1, dtype=np.float64) ** (-r / (2 - p)) if p < 2 else e1)
    rows = [np.maximum.accumulate(rw[::-1])[::-1] for rw in rows]
    return ProfileBatch.dense(np.array(rows), "extremal")


def stress_batches(sn, total: int, rng: np.random.Generator, gaussian: int | None = None, chunk: int = 100_000):
    """Yield ProfileBatches holding ``total`` stress vectors for the norm ``sn``."""
    n = sn.params.n
    ext = extremal_profiles(sn)
    yield ext
    left = total - len(ext)
    if gaussian is None:
        gaussian = min(10_000, max(200, 10_000_000 // n))
    gaussian = min(gaussian, left)
    for start in range(0, gaussian, 2000):
        yield gaussian_full(n, min(2000, gaussian - start), rng)
    left -= gaussian
    sparse = left // 4
    for start in range(0, sparse, chunk):
        yield random_sparse(n, min(chunk, sparse - start), rng)
    left -= sparse
    for start in range(0, left, chunk):
        yield random_piecewise(n, min(chunk, left - start), rng)
