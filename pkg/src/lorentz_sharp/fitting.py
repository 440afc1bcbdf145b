"""Fitting the universal constants of every inequality family.

A family couples a grid of points, an oracle value per point (quadrature, exact
sums, Monte Carlo or exact-mode certificates) and an envelope written as a
function of its constant. For each point the tightest constant is found by a
log-scale bisection; the fitted pair is

    C_fit = 1.25 * max_pt C_pt,    c_fit = min_pt c_pt / 1.25.

One-sided families (the theorem formulas, the probability envelopes) use the
upper envelope on both sides, so c_fit records how loose the formula can get.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Sequence

import numpy as np

from . import analytic_bounds as ab
from .constants import ConstantsTable, FittedConstants
from .core import CaseTag, Params, bisect_log
from .grids import load_grid, refine_axis
from .lorentz import sphere_sup, sphere_sup_envelope
from .montecarlo import (
    BandRatios,
    DEFAULT_SEED,
    EnvelopeRatio,
    PsiTableStatistic,
    envelope_target,
    sample_statistics,
    sharpness_profile,
)
from .sharp import MEDIAN_SAMPLES, exact_certificates, paper_F, paper_R_simple, paper_S

SAFETY = 1.25
MIN_GRID_POINTS = 8
GRIDS = ("canonical", "doubled", "q100")
TAIL_T_GRID = tuple(0.5 * k for k in range(1, 7))


class GridTooSmallError(ValueError):
    pass


@dataclass
class FitContext:
    samples: int = 2000
    seed: int = DEFAULT_SEED
    workers: int = 1
    median_samples: int = MEDIAN_SAMPLES
    tail_samples: int = 100_000
    cache: dict = field(default_factory=dict)


Point = dict
Envelope = Callable[[Point, float], float]


@dataclass
class Family:
    name: str
    points: Callable[[str], list[Point]]
    oracle: Callable[[list[Point], FitContext], Sequence[float]]
    upper: Envelope | None = None
    lower: Envelope | None = None
    exponent: Callable[[Point], float] = lambda pt: 1.0
    q_axis: str | None = None
    custom: Callable[[list[Point], Sequence, FitContext], tuple[float, float, dict]] | None = None
    monte_carlo: bool = False

    def grids(self) -> tuple[str, ...]:
        return GRIDS if self.q_axis else GRIDS[:2]


def _safe(f: Envelope, pt: Point, c: float) -> float:
    try:
        v = f(pt, c)
    except OverflowError:
        return math.inf
    return v if not math.isnan(v) else math.inf


def tight_upper(f: Envelope, pt: Point, value: float) -> float:
    return bisect_log(lambda C: _safe(f, pt, C) >= value, 1e-9, 1e9)


def tight_lower(f: Envelope, pt: Point, value: float) -> float:
    return bisect_log(lambda c: _safe(f, pt, c) > value, 1e-9, 1e9)


# -- cartesian grids ---------------------------------------------------------


def axis_grid(axes: dict, refine: Sequence[str] = (), q_axis: str | None = None, q_extra=(100.0,), ints=()):
    """points(grid) for a cartesian product of named axes."""

    def points(grid: str) -> list[Point]:
        ax = {k: list(v) for k, v in axes.items()}
        if grid == "doubled":
            for k in refine:
                ax[k] = refine_axis(ax[k])
        elif grid == "q100":
            if q_axis is None:
                raise ValueError("family has no q axis")
            ax[q_axis] = sorted(set(ax[q_axis]) | set(q_extra))
        elif grid != "canonical":
            raise ValueError(f"unknown grid {grid!r}")
        for k in ints:
            ax[k] = sorted({int(round(v)) for v in ax[k]})
        names = list(ax)
        return [dict(zip(names, combo)) for combo in itertools.product(*(ax[k] for k in names))]

    return points


def _per_point(fn):
    def oracle(points, ctx):
        return [fn(pt) for pt in points]

    return oracle


# -- analytic families --------------------------------------------------------

GAMMA_B = [0, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3, 5, 7, 10, 20, 50]
GAMMA_Q = [0, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3, 5, 7, 10, 20, 50]
LOG_N = [10, 100, 1000, 10_000, 100_000]
LOG_Q = [0, 0.25, 0.5, 1, 2, 3, 5]


def _gamma_family(sign: str) -> Family:
    name = "incomplete_gamma_minus" if sign == "-" else "incomplete_gamma_plus"

    def env(pt, c):
        e = ab.incomplete_gamma_exponent(pt["q"], sign)
        return c**e * ab.incomplete_gamma_core(pt["b"], pt["q"], sign)

    return Family(
        name,
        axis_grid({"b": GAMMA_B, "q": GAMMA_Q}, ("b", "q"), "q"),
        _per_point(lambda pt: ab.incomplete_gamma_quadrature(pt["b"], pt["q"], sign)),
        env,
        env,
        lambda pt: ab.incomplete_gamma_exponent(pt["q"], sign),
        q_axis="q",
    )


def _log_sum_family(branch: str) -> Family:
    if branch == "low":
        a_axis = [0, 0.1, 0.3, 0.5, 0.7, 0.9, 1]
        up = lambda pt, C: ab.log_sum_low_upper(pt["n"], pt["a"], pt["q"], C)
        lo = lambda pt, c: ab.log_sum_low_lower(pt["n"], pt["a"], pt["q"], c)
        expo = lambda pt: 1 + pt["q"]
    else:
        a_axis = [1, 1.1, 1.25, 1.5, 2, 3, 5]
        up = lambda pt, C: ab.log_sum_high_upper(pt["n"], pt["a"], pt["q"], C)
        lo = lambda pt, c: ab.log_sum_high_lower(pt["n"], pt["a"], pt["q"], c)
        expo = lambda pt: 1.0
    return Family(
        f"log_sum_{branch}",
        axis_grid({"n": LOG_N, "a": a_axis, "q": LOG_Q}, ("n", "a", "q"), "q", ints=("n",)),
        _per_point(lambda pt: ab.weighted_log_sum_exact(pt["n"], pt["a"], pt["q"])),
        up,
        lo,
        expo,
        q_axis="q",
    )


def _power_integral_family() -> Family:
    env = lambda pt, c: c * ab.power_integral_core(pt["a"], pt["T"])
    return Family(
        "power_integral",
        axis_grid(
            {
                "a": [-2, -1, -0.5, 0, 0.3, 0.5, 0.7, 0.9, 1, 1.1, 1.5, 2, 3, 5],
                "T": [1, 1.01, 1.1, 1.5, 2, math.e, 5, 10, 30, 100, 1e3, 1e4, 1e6, 1e8, 1e10, 1e12],
            },
            ("a", "T"),
        ),
        _per_point(lambda pt: ab.power_integral_exact(pt["a"], pt["T"])),
        env,
        env,
    )


def _sphere_family() -> Family:
    return Family(
        "sphere_sup_bound",
        axis_grid(
            {
                "n": [2, 4, 8, 16, 32, 100, 1000, 10_000, 100_000],
                "r": [0, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2],
                "p": [0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.9],
            },
            ("n", "r", "p"),
            ints=("n",),
        ),
        _per_point(lambda pt: sphere_sup(pt["n"], pt["r"], pt["p"])),
        lambda pt, C: sphere_sup_envelope(pt["n"], pt["r"], pt["p"], C),
        lambda pt, c: sphere_sup_envelope(pt["n"], pt["r"], pt["p"], c, lower=True),
        lambda pt: 1 + 1 / pt["p"] if pt["p"] < 2 / 3 else 1.0,
    )


# -- Monte Carlo median families ----------------------------------------------


def _mc_psi_medians(tag: str, r_of, p_of):
    """Oracle: medians of sum i**(-r) X_[i]**p, one shared sample per n."""

    def oracle(points, ctx):
        out = [math.nan] * len(points)
        by_n: dict[int, list[int]] = {}
        for k, pt in enumerate(points):
            by_n.setdefault(pt["n"], []).append(k)
        for n, idx in sorted(by_n.items()):
            by_p: dict[float, list[int]] = {}
            for k in idx:
                by_p.setdefault(p_of(points[k]), []).append(k)
            groups = tuple((p, tuple(r_of(points[k]) for k in ks)) for p, ks in by_p.items())
            stat = {"psi": PsiTableStatistic(groups)}
            cols = sample_statistics(n, ctx.samples, ctx.seed, f"fit:{tag}:{n}", stat, ctx.workers)["psi"]
            cols = cols.reshape(ctx.samples, -1)
            for c, k in enumerate(k for ks in by_p.values() for k in ks):
                out[k] = float(np.median(cols[:, c]))
        return out

    return oracle


MEDIAN_N = [100, 1000, 10_000, 100_000]
MEDIAN_P = [0, 0.2, 0.4, 0.6, 0.8, 1, 1.5, 2]


def _median_family(branch: str) -> Family:
    r_axis = [0, 0.2, 0.4, 0.6, 0.8, 1] if branch == "low" else [1, 1.25, 1.5, 2, 3, 4]
    envf = ab.median_low_envelope if branch == "low" else ab.median_high_envelope
    env = lambda pt, c: envf(pt["n"], pt["r"], pt["p"], c)
    return Family(
        f"median_{branch}",
        axis_grid({"n": MEDIAN_N, "r": r_axis, "p": MEDIAN_P}, ("p",)),
        _mc_psi_medians(f"median_{branch}", lambda pt: pt["r"], lambda pt: pt["p"]),
        env,
        env,
        lambda pt: 1 + pt["p"],
        monte_carlo=True,
    )


def _remark_family() -> Family:
    env = lambda pt, c: c * ab.remark_median_core(pt["n"], pt["r"], pt["p"])
    return Family(
        "remark_median",
        axis_grid(
            {"n": MEDIAN_N, "r": [0, 0.1, 0.25, 0.4, 0.5, 0.75, 1, 1.5, 2], "p": [1.05, 1.1, 1.2, 1.3, 1.4, 1.45]},
            ("p",),
        ),
        _mc_psi_medians("remark_median", lambda pt: 2 * pt["r"], lambda pt: 2 * (pt["p"] - 1)),
        env,
        env,
        monte_carlo=True,
    )


# -- order statistics and tail shape -------------------------------------------


def _envelope_oracle(points, ctx):
    """Per (n, t): the 1 - target quantile of max_i X_[i] / sqrt(ln(n/i) + t^2/i)."""
    samples = max(ctx.samples, 20_000)
    out = [math.nan] * len(points)
    by_n: dict[int, list[int]] = {}
    for k, pt in enumerate(points):
        by_n.setdefault(pt["n"], []).append(k)
    for n, idx in sorted(by_n.items()):
        stats = {f"k{k}": EnvelopeRatio(n, points[k]["t"]) for k in idx}
        vals = sample_statistics(n, samples, ctx.seed, f"fit:envelope:{n}", stats, ctx.workers)
        for k in idx:
            target = envelope_target(points[k]["t"])
            out[k] = float(np.quantile(vals[f"k{k}"], 1 - target)) if target < 1 else 0.0
    return out


def _band_oracle(points, ctx):
    samples = max(ctx.samples, 10_000)
    out = []
    for pt in points:
        n = pt["n"]
        v = sample_statistics(n, samples, ctx.seed, f"fit:band:{n}", {"b": BandRatios(n)}, ctx.workers)["b"]
        out.append((float(np.quantile(v[:, 0], 0.2)), float(np.quantile(v[:, 1], 0.8))))
    return out


def _band_fit(points, values, ctx):
    lows = [v[0] for v in values]
    highs = [v[1] for v in values]
    c, C = min(lows) / SAFETY, max(highs) * SAFETY
    return c, C, {"points": len(points), "c_raw": min(lows), "C_raw": max(highs)}


def _tail_points(grid: str) -> list[Point]:
    pairs = {}
    for gp in load_grid():
        if gp.params.p > 1:
            pairs.setdefault((gp.params.r, gp.params.p), None)
    ns = [100, 1000] if grid == "canonical" else [100, 316, 1000]
    return [{"n": n, "r": r, "p": p} for (r, p) in pairs for n in ns]


def _tail_oracle(points, ctx):
    out = []
    for pt in points:
        prof = sharpness_profile(Params(pt["n"], pt["r"], pt["p"], 1.0), TAIL_T_GRID, ctx.tail_samples, ctx.seed, ctx.workers)
        out.append(prof.sigma)
    return out


# -- theorem formulas against exact-mode certificates -------------------------


def theorem_points(case: CaseTag):
    def points(grid: str) -> list[Point]:
        pts = load_grid(doubled=(grid == "doubled"))
        return [{"params": gp.params} for gp in pts if gp.params.case is case and not gp.params.degenerate]

    return points


def _exact_oracle(attr: str):
    def oracle(points, ctx):
        cache = ctx.cache.setdefault("exact", {})
        todo = [pt["params"] for pt in points if pt["params"] not in cache]
        if todo:
            for pr, (cert, _) in zip(todo, exact_certificates(todo, ctx.median_samples, ctx.seed, ctx.workers)):
                cache[pr] = cert
        return [getattr(cache[pt["params"]], attr) for pt in points]

    return oracle


def _theorem_families() -> list[Family]:
    fams = []
    for case in CaseTag:
        pts = theorem_points(case)
        s_env = lambda pt, C: paper_S(pt["params"], C)
        fams.append(Family(f"theorem_{case}_S", pts, _exact_oracle("S"), s_env, None, monte_carlo=True))
        if case is CaseTag.I:
            continue
        f_env = lambda pt, C: paper_F(pt["params"], C)
        r_env = lambda pt, C: paper_R_simple(pt["params"], C)
        fams.append(Family(f"theorem_{case}_F", pts, _exact_oracle("holder_factor"), f_env, None))
        fams.append(Family(f"theorem_{case}_Rsimple", pts, _exact_oracle("R"), r_env, None, monte_carlo=True))
    return fams


def _identity(pt, c):
    return c


def build_registry() -> dict[str, Family]:
    fams = [
        _gamma_family("-"),
        _gamma_family("+"),
        _log_sum_family("low"),
        _log_sum_family("high"),
        _power_integral_family(),
        _sphere_family(),
        _median_family("low"),
        _median_family("high"),
        _remark_family(),
        Family(
            "orderstat_envelope",
            axis_grid({"n": [10, 30, 100, 300, 1000, 3000, 10_000], "t": [1, 1.25, 1.5, 1.75, 2, 2.5]}, ("n", "t"), ints=("n",)),
            _envelope_oracle,
            _identity,
            None,
            monte_carlo=True,
        ),
        Family(
            "median_band",
            axis_grid({"n": [10, 30, 100, 300, 1000, 3000, 10_000, 30_000]}, ("n",), ints=("n",)),
            _band_oracle,
            custom=_band_fit,
            monte_carlo=True,
        ),
        Family("tail_slope", _tail_points, _tail_oracle, _identity, _identity, monte_carlo=True),
        *_theorem_families(),
    ]
    return {f.name: f for f in fams}


REGISTRY = build_registry()

# -- fitting -------------------------------------------------------------------


@dataclass
class PointRatios:
    """Tightest constants per point; the raw material of a fit."""

    points: list[Point]
    values: list
    C_pts: list[float]
    c_pts: list[float]
    skipped: int


def point_ratios(family: Family, points: list[Point], values) -> PointRatios:
    Cs, cs, kept, kept_vals = [], [], [], []
    skipped = 0
    for pt, v in zip(points, values):
        if v is None or (isinstance(v, float) and math.isnan(v)):
            skipped += 1
            continue
        if v == 0 and _safe(family.upper, pt, 1.0) == 0:
            skipped += 1
            continue
        C = tight_upper(family.upper, pt, v)
        c = tight_lower(family.lower, pt, v) if family.lower else C
        Cs.append(C)
        cs.append(c)
        kept.append(pt)
        kept_vals.append(v)
    return PointRatios(kept, kept_vals, Cs, cs, skipped)


def grid_descriptor(family: Family, grid: str, npoints: int) -> str:
    return f"{family.name}:{grid}:{npoints} points"


def fit_constants(
    family: str | Family,
    grid: str = "canonical",
    samples: int = 2000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    ctx: FitContext | None = None,
) -> FittedConstants:
    fam = REGISTRY[family] if isinstance(family, str) else family
    ctx = ctx or FitContext(samples=samples, seed=seed, workers=workers)
    points = fam.points(grid)
    if len(points) < MIN_GRID_POINTS:
        raise GridTooSmallError(f"{fam.name}: grid {grid!r} has {len(points)} < {MIN_GRID_POINTS} points")
    values = fam.oracle(points, ctx)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if fam.custom is not None:
        c, C, extra = fam.custom(points, values, ctx)
        return FittedConstants(fam.name, c, C, grid_descriptor(fam, grid, len(points)), False, stamp, extra)
    pr = point_ratios(fam, points, values)
    if len(pr.C_pts) < MIN_GRID_POINTS:
        raise GridTooSmallError(f"{fam.name}: only {len(pr.C_pts)} usable points on grid {grid!r}")
    C_raw, c_raw = max(pr.C_pts), min(pr.c_pts)
    extra = {
        "points": len(pr.C_pts),
        "skipped": pr.skipped,
        "C_raw": C_raw,
        "c_raw": c_raw,
        "window": C_raw / c_raw,
        "seed": ctx.seed,
    }
    if fam.monte_carlo:
        extra["samples"] = ctx.samples
    return FittedConstants(
        fam.name, c_raw / SAFETY, C_raw * SAFETY, grid_descriptor(fam, grid, len(pr.C_pts)), False, stamp, extra
    )


def fit_all(
    families: Sequence[str] | None = None,
    grid: str = "canonical",
    samples: int = 2000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    progress: Callable[[str], None] | None = None,
) -> ConstantsTable:
    ctx = FitContext(samples=samples, seed=seed, workers=workers)
    table = ConstantsTable()
    for name in families or list(REGISTRY):
        if progress:
            progress(name)
        table.set(fit_constants(name, grid, ctx=ctx))
    return table


def drift(a: FittedConstants, b: FittedConstants) -> float:
    """Largest multiplicative move of either constant between two fits."""
    return max(a.C_fit / b.C_fit, b.C_fit / a.C_fit, a.c_fit / b.c_fit, b.c_fit / a.c_fit)


def window_growth(family: str | Family, grid: str, ctx: FitContext | None = None) -> float:
    """Ratio of the normalized window on ``grid`` to the canonical one."""
    base = fit_constants(family, "canonical", ctx=ctx)
    other = fit_constants(family, grid, ctx=ctx)
    return other.extra["window"] / base.extra["window"]
