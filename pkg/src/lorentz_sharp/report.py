"""Report rows and their CSV / JSON files.

The CSV file holds only the data section (header plus rows), so two runs with
the same seed produce byte-identical CSV files. The JSON mirror wraps the same
rows with run metadata (timestamp, worker count, notes).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

COLUMNS = (
    "family", "case", "n", "r", "p", "t", "statistic",
    "point", "ci_low", "ci_high", "target", "pass", "samples", "seed",
)


@dataclass
class ReportRow:
    family: str
    statistic: str
    point: float
    passed: bool
    case: str = ""
    n: int | None = None
    r: float | None = None
    p: float | None = None
    t: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    target: float | None = None
    samples: int | None = None
    seed: int | None = None

    @classmethod
    def at(cls, params, family: str, statistic: str, point: float, passed: bool, **kw) -> "ReportRow":
        return cls(family, statistic, point, passed, str(params.case), params.n, params.r, params.p, params.t, **kw)

    def record(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return {k: d[k] for k in COLUMNS}


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def run_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S_%fZ")


class Report:
    def __init__(self, command: str, seed: int | None = None):
        self.command = command
        self.seed = seed
        self.rows: list[ReportRow] = []
        self.notes: list[str] = []
        self.meta: dict = {}

    def add(self, row: ReportRow) -> ReportRow:
        self.rows.append(row)
        return row

    def extend(self, rows) -> None:
        self.rows.extend(rows)

    def note(self, text: str) -> None:
        self.notes.append(text)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> list[ReportRow]:
        return [r for r in self.rows if not r.passed]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.rows:
            rec = row.record()
            w.writerow([_cell(rec[c]) for c in COLUMNS])
        return buf.getvalue()

    def data_json(self) -> list[dict]:
        return [{k: _json_value(v) for k, v in row.record().items()} for row in self.rows]

    def json_text(self, stamp: str) -> str:
        payload = {
            "meta": {"command": self.command, "seed": self.seed, "timestamp": stamp, "notes": self.notes, **self.meta},
            "rows": self.data_json(),
        }
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"

    def write(self, out_dir, fmt: str = "csv", stamp: str | None = None) -> list[Path]:
        """Write fresh timestamped files; never appends to or overwrites a file."""
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stamp = stamp or run_stamp()
        stem = f"{self.command}-{stamp}"
        k = 1
        while (out / f"{stem}.json").exists() or (out / f"{stem}.csv").exists():
            k += 1
            stem = f"{self.command}-{stamp}-{k}"
        paths = []
        if fmt == "csv":
            paths.append(_write_new(out / f"{stem}.csv", self.csv_text()))
        paths.append(_write_new(out / f"{stem}.json", self.json_text(stamp)))
        return paths


def _write_new(path: Path, text: str) -> Path:
    with open(path, "x", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_rows(path) -> list[dict]:
    """Rows of a report file, from either format."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text(encoding="utf-8"))["rows"]
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
