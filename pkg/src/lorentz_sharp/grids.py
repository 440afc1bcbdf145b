"""Parameter grids: the shipped canonical grid and axis refinement helpers."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .core import Params


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridPoint:
    region: str
    params: Params


def canonical_grid_path() -> Path:
    return Path(str(resources.files("lorentz_sharp") / "data" / "canonical_grid.json"))


def _refine_ns(ns: Sequence[int]) -> list[int]:
    out = set(ns)
    for a, b in zip(ns, ns[1:]):
        out.add(int(round(math.sqrt(a * b))))
    return sorted(out)


def _refine_ts(ts: Sequence[float]) -> list[float]:
    out = set(ts)
    for a, b in zip(ts, ts[1:]):
        out.add(0.5 * (a + b))
    return sorted(out)


def load_grid(path=None, *, doubled: bool = False) -> list[GridPoint]:
    """Read a grid file; ``doubled`` inserts midpoints along the n and t axes."""
    path = Path(path) if path is not None else canonical_grid_path()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise GridError(f"cannot read grid {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GridError(f"grid {path} is not valid JSON: {exc}") from exc
    try:
        ns = sorted(int(v) for v in raw["n"])
        ts = sorted(float(v) for v in raw["t"])
        regions = raw["regions"]
        if doubled:
            ns, ts = _refine_ns(ns), _refine_ts(ts)
        points = []
        for region, pairs in regions.items():
            for (r, p), n, t in itertools.product(pairs, ns, ts):
                points.append(GridPoint(region, Params(n, r, p, t)))
    except (KeyError, TypeError, ValueError) as exc:
        raise GridError(f"malformed grid {path}: {exc}") from exc
    if not points:
        raise GridError(f"grid {path} is empty")
    return points


def single_point(n: int, r: float, p: float, t: float) -> list[GridPoint]:
    return [GridPoint("cli", Params(n, r, p, t))]


def rp_pairs(points: Iterable[GridPoint]) -> list[tuple[float, float]]:
    seen = {}
    for gp in points:
        seen.setdefault((gp.params.r, gp.params.p), None)
    return list(seen)


def refine_axis(values: Sequence[float]) -> list[float]:
    """Insert a midpoint between neighbours: geometric when both are positive
    and far apart, arithmetic otherwise."""
    vals = sorted(values)
    out = set(vals)
    for a, b in zip(vals, vals[1:]):
        if a > 0 and b / a > 3:
            out.add(math.sqrt(a * b))
        else:
            out.add(0.5 * (a + b))
    return sorted(out)
