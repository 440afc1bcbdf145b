"""Fitted universal constants and the JSON file that stores them.

The inequalities implemented here hold with unspecified universal constants.
Values are fitted once against independent oracles (see ``fitting``), frozen,
and shipped in ``data/constants.json``. The environment variable
``LORENTZ_SHARP_CONSTANTS`` points the library at a different file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

ENV_VAR = "LORENTZ_SHARP_CONSTANTS"


class ConstantsError(RuntimeError):
    pass


class ConstantsNotFrozenError(ConstantsError):
    def __init__(self, family: str, reason: str = ""):
        msg = f"constants for {family!r} unavailable"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg + "; run fit-constants first")
        self.family = family


class ConstantsFileError(ConstantsError):
    pass


@dataclass
class FittedConstants:
    family: str
    c_fit: float
    C_fit: float
    grid_descriptor: str
    frozen: bool = False
    timestamp: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.c_fit <= self.C_fit) or not math.isfinite(self.C_fit):
            raise ConstantsError(
                f"{self.family}: need 0 < c_fit <= C_fit, got {self.c_fit}, {self.C_fit}"
            )


class ConstantsTable:
    """Mapping family -> FittedConstants with file round-tripping."""

    def __init__(self, entries: dict[str, FittedConstants] | None = None, path=None):
        self.entries: dict[str, FittedConstants] = dict(entries or {})
        self.path = path

    def __contains__(self, family: str) -> bool:
        return family in self.entries

    def __getitem__(self, family: str) -> FittedConstants:
        return self.entries[family]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def set(self, fc: FittedConstants) -> None:
        self.entries[fc.family] = fc

    def require(self, family: str) -> FittedConstants:
        fc = self.entries.get(family)
        if fc is None:
            raise ConstantsNotFrozenError(family, "missing")
        if not fc.frozen:
            raise ConstantsNotFrozenError(family, "not frozen")
        return fc

    def freeze(self) -> None:
        for fc in self.entries.values():
            fc.frozen = True

    def to_json(self) -> str:
        # repr-based float output round-trips bit-exactly.
        payload = {name: asdict(fc) for name, fc in sorted(self.entries.items())}
        for item in payload.values():
            del item["family"]
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(self.to_json(), encoding="utf-8")
        os.replace(tmp, path)
        self.path = path
        return path

    @classmethod
    def from_json(cls, text: str, path=None) -> "ConstantsTable":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConstantsFileError(f"constants file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConstantsFileError(f"constants file {path} must hold a JSON object")
        entries = {}
        for name, item in raw.items():
            try:
                entries[name] = FittedConstants(
                    family=name,
                    c_fit=float(item["c_fit"]),
                    C_fit=float(item["C_fit"]),
                    grid_descriptor=str(item["grid_descriptor"]),
                    frozen=bool(item.get("frozen", False)),
                    timestamp=str(item.get("timestamp", "")),
                    extra=dict(item.get("extra", {})),
                )
            except (KeyError, TypeError, ValueError, ConstantsError) as exc:
                raise ConstantsFileError(f"bad entry {name!r} in {path}: {exc}") from exc
        return cls(entries, path=path)

    @classmethod
    def load(cls, path) -> "ConstantsTable":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConstantsFileError(f"cannot read constants file {path}: {exc}") from exc
        return cls.from_json(text, path=path)


def default_constants_path() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    return Path(str(resources.files("lorentz_sharp") / "data" / "constants.json"))


_CACHE: dict[str, ConstantsTable] = {}


def get_constants(constants: ConstantsTable | None = None) -> ConstantsTable:
    """Return ``constants`` or the default table, read once per path."""
    if constants is not None:
        return constants
    path = default_constants_path()
    key = str(path)
    if key not in _CACHE:
        if not path.exists():
            _CACHE[key] = ConstantsTable(path=path)
        else:
            _CACHE[key] = ConstantsTable.load(path)
    return _CACHE[key]


def clear_cache() -> None:
    _CACHE.clear()
