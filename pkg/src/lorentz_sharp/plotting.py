"""Optional figures written next to report files (needs the ``plot`` extra)."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    return path


def envelope_figure(rows, path) -> Path:
    """Position of each oracle value inside its [lower, upper] envelope, per family."""
    plt = _pyplot()
    by_family = defaultdict(list)
    for row in rows:
        if row.ci_low and row.ci_high and row.ci_high > row.ci_low > 0 and row.point > 0:
            pos = math.log(row.point / row.ci_low) / math.log(row.ci_high / row.ci_low)
            by_family[row.family].append(pos)
    fig, ax = plt.subplots(figsize=(8, 4))
    names = sorted(by_family)
    ax.boxplot([by_family[k] for k in names], orientation="horizontal", tick_labels=names)
    ax.axvline(0, color="k", lw=0.8)
    ax.axvline(1, color="k", lw=0.8)
    ax.set_xlabel("log position between lower (0) and upper (1) envelope")
    return _save(fig, Path(path))


def coverage_figure(rows, path) -> Path:
    """Empirical exceedance probabilities against 2 exp(-t^2/2)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    cov = [r for r in rows if r.family == "coverage"]
    by_case = defaultdict(list)
    for r in cov:
        by_case[r.case].append(r)
    for case, items in sorted(by_case.items()):
        ax.scatter([r.t for r in items], [max(r.point, 1e-7) for r in items], label=f"case {case}", s=14)
    ts = sorted({r.t for r in cov}) or [1.0]
    grid = [ts[0] + k * (ts[-1] - ts[0]) / 50 for k in range(51)]
    ax.plot(grid, [2 * math.exp(-t * t / 2) for t in grid], "k--", label="2 exp(-t^2/2)")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("P(|X|_sharp > S)")
    ax.legend(fontsize=7)
    return _save(fig, Path(path))


def sharpness_figure(rows, path) -> Path:
    """-ln(tail) against t^2 for every sharpness profile."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    curves = defaultdict(list)
    for r in rows:
        if r.family == "sharpness_tail" and r.point > 0:
            curves[(r.n, r.r, r.p)].append((r.t * r.t, -math.log(r.point)))
    for (n, rr, p), pts in sorted(curves.items()):
        pts.sort()
        ax.plot([a for a, _ in pts], [b for _, b in pts], marker="o", ms=3, lw=0.8, label=f"n={n} r={rr} p={p}")
    ax.set_xlabel("t^2")
    ax.set_ylabel("-ln P(L >= m + t b)")
    if len(curves) <= 12:
        ax.legend(fontsize=6)
    return _save(fig, Path(path))


def holder_figure(rows, path) -> Path:
    """Worst Holder ratio per certified point."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    hold = [r for r in rows if r.family == "holder"]
    ax.scatter(range(len(hold)), [r.point for r in hold], s=10)
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("grid point")
    ax.set_ylabel("max psi / (F |x|_sharp^alpha)")
    return _save(fig, Path(path))


FIGURES = {
    "verify-lemmas": [("envelopes", envelope_figure)],
    "certify": [("holder", holder_figure)],
    "simulate": [("coverage", coverage_figure), ("sharpness", sharpness_figure)],
}


def render(command: str, rows, stem: Path) -> list[Path]:
    """Write the figures for ``command`` as ``<stem>-<name>.png``."""
    return [fn(rows, stem.with_name(f"{stem.name}-{name}.png")) for name, fn in FIGURES.get(command, [])]
