"""Lorentz quasi-norms, the weighted power sum psi, and sphere suprema."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .analytic_bounds import TwoSidedBound, power_sum_exact
from .constants import ConstantsTable, get_constants
from .core import powzero, rearrange


@lru_cache(maxsize=256)
def power_weights(n: int, r: float) -> np.ndarray:
    """Read-only array (i**(-r)) for i = 1..n."""
    w = np.arange(1, n + 1, dtype=np.float64) ** (-float(r))
    w.flags.writeable = False
    return w


def psi_sorted(rows: np.ndarray, r: float, p: float) -> np.ndarray:
    """psi on already-rearranged input; works on the last axis of a batch."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[-1]
    w = power_weights(n, r)
    if p == 0:
        return np.full(rows.shape[:-1], w.sum()) if rows.ndim > 1 else float(w.sum())
    return np.power(rows, p) @ w


def psi(x, r: float, p: float) -> float:
    """Sum over i of i**(-r) * x_[i]**p with 0**0 = 1."""
    if p < 0:
        raise ValueError("p must be non-negative")
    xs = rearrange(x).values
    w = power_weights(len(xs), r)
    return float(np.dot(w, powzero(xs, p)))


def lorentz_norm(x, r: float, p: float) -> float:
    """(sum i**(-r) x_[i]**p)**(1/p)."""
    if p < 1:
        raise ValueError("exponent below 1 unsupported here")
    return psi(x, r, p) ** (1.0 / p)


def sphere_sup(n: int, r: float, p: float) -> float:
    """Supremum of the (r, p) Lorentz quasi-norm over the Euclidean unit sphere."""
    if p <= 0:
        raise ValueError("p must be positive")
    if p >= 2:
        return 1.0
    return power_sum_exact(n, 2 * r / (2 - p)) ** ((2 - p) / (2 * p))


def sphere_maximizer(n: int, r: float, p: float) -> np.ndarray:
    """Unit vector attaining sphere_sup; e_1 when p >= 2."""
    if p <= 0:
        raise ValueError("p must be positive")
    if p >= 2:
        e1 = np.zeros(n)
        e1[0] = 1.0
        return e1
    theta = np.arange(1, n + 1, dtype=np.float64) ** (-r / (2 - p))
    return theta / math.sqrt(power_sum_exact(n, 2 * r / (2 - p)))


def sphere_sup_shape(n: int, r: float, p: float) -> float:
    ln = math.log(n)
    return (ln / (1 + abs(2 - 2 * r - p) * ln)) ** ((2 - p) / (2 * p)) * (
        1 + n ** ((2 - 2 * r - p) / (2 * p))
    )


# Threshold below which the additive "1+" of the envelope is dropped.
R0 = 1.0


def sphere_sup_envelope(n: int, r: float, p: float, c: float, lower: bool = False) -> float:
    """Simplified envelope for sphere_sup as a function of the constant.

    The additive 1 (1/2 for the lower side) is kept only for r >= R0, and for
    p < 2/3 the whole expression is multiplied by c**(1/p).
    """
    val = c * sphere_sup_shape(n, r, p)
    if r >= R0:
        val += 0.5 if lower else 1.0
    if p < 2.0 / 3.0:
        val *= c ** (1.0 / p)
    return val


def sphere_sup_bound(n: int, r: float, p: float, constants: ConstantsTable | None = None) -> TwoSidedBound:
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (0 < p < 2):
        raise ValueError("p must lie in (0, 2)")
    fc = get_constants(constants).require("sphere_sup_bound")
    e = 1 + 1 / p if p < 2.0 / 3.0 else 1.0
    return TwoSidedBound(
        sphere_sup_envelope(n, r, p, fc.c_fit, lower=True),
        sphere_sup_envelope(n, r, p, fc.C_fit),
        e,
    )


def sphere_objective(theta: np.ndarray, r: float, p: float) -> np.ndarray:
    """(sum i**(-r) theta_[i]**p)**(1/p) row-wise for a batch of vectors."""
    a = np.sort(np.abs(theta), axis=-1)[..., ::-1]
    return psi_sorted(a, r, p) ** (1.0 / p)


def sphere_search(
    n: int,
    r: float,
    p: float,
    *,
    restarts: int = 200,
    seed: int = 0,
    max_iter: int = 5000,
    grad_tol: float = 1e-10,
) -> float:
    """Best objective value found by projected gradient ascent on the sphere.

    Batched over random restarts in the positive orthant. A step is accepted
    only if it increases the objective, otherwise the step size is halved.
    """
    rng = np.random.default_rng(seed)
    theta = np.abs(rng.standard_normal((restarts, n))) + 1e-3
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    w = power_weights(n, r)
    step = np.full(restarts, 0.5)
    val = sphere_objective(theta, r, p)
    active = np.ones(restarts, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        th = theta[idx]
        order = np.argsort(-th, axis=1)
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(n)[None, :].repeat(len(idx), 0), axis=1)
        wr = w[ranks]
        s = np.sum(wr * th**p, axis=1)
        grad = (s ** (1.0 / p - 1.0))[:, None] * wr * th ** (p - 1.0)
        # tangential part
        grad -= np.sum(grad * th, axis=1, keepdims=True) * th
        gnorm = np.linalg.norm(grad, axis=1)
        done = gnorm < grad_tol
        cand = th + step[idx, None] * grad
        # keeps th**(p - 1) finite for p < 1
        cand = np.maximum(cand, 1e-12)
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        cval = sphere_objective(cand, r, p)
        better = cval > val[idx]
        theta[idx[better]] = cand[better]
        val[idx[better]] = cval[better]
        step[idx[~better]] *= 0.5
        active[idx[done | (step[idx] < 1e-16)]] = False
    return float(val.max())
