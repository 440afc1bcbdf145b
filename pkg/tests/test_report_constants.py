import json
import math

import pytest

from lorentz_sharp import constants as cst
from lorentz_sharp.constants import (
    ConstantsError,
    ConstantsFileError,
    ConstantsNotFrozenError,
    ConstantsTable,
    FittedConstants,
)
from lorentz_sharp.core import Params
from lorentz_sharp.report import COLUMNS, Report, ReportRow, read_rows


def sample_report():
    rep = Report("verify-lemmas", seed=7)
    rep.add(ReportRow.at(Params(100, 0.3, 1.2, 2.0), "fam", "stat", 0.1 + 0.2, True, ci_low=0.25, target=math.inf))
    rep.add(ReportRow("other", "s", 1e-300, False))
    rep.note("hello")
    return rep


class TestReport:
    def test_csv_layout(self):
        lines = sample_report().csv_text().splitlines()
        assert lines[0].split(",") == list(COLUMNS)
        first = dict(zip(COLUMNS, lines[1].split(",")))
        assert first["point"] == "0.30000000000000004"  # repr round-trips
        assert first["pass"] == "true"
        assert first["target"] == "inf"
        assert first["case"] == "II"
        assert lines[2].split(",")[COLUMNS.index("n")] == ""

    def test_status(self):
        rep = sample_report()
        assert not rep.passed
        assert [r.family for r in rep.failures] == ["other"]

    def test_write_fresh_files(self, tmp_path):
        rep = sample_report()
        a = rep.write(tmp_path, "csv", stamp="S")
        b = rep.write(tmp_path, "csv", stamp="S")
        assert [p.name for p in a] == ["verify-lemmas-S.csv", "verify-lemmas-S.json"]
        assert [p.name for p in b] == ["verify-lemmas-S-2.csv", "verify-lemmas-S-2.json"]
        assert a[0].read_bytes() == b[0].read_bytes()
        meta = json.loads(a[1].read_text())["meta"]
        assert meta["seed"] == 7 and meta["notes"] == ["hello"]

    def test_json_only(self, tmp_path):
        (path,) = sample_report().write(tmp_path, "json", stamp="S")
        rows = read_rows(path)
        assert rows[0]["target"] is None  # non-finite values become null
        assert rows[0]["point"] == 0.30000000000000004
        with pytest.raises(ValueError):
            sample_report().write(tmp_path, "xml")

    def test_read_csv(self, tmp_path):
        path = sample_report().write(tmp_path, "csv", stamp="S")[0]
        assert read_rows(path)[1]["family"] == "other"


class TestConstants:
    def table(self):
        return ConstantsTable({"a": FittedConstants("a", 0.5, 2.0, "grid", True, "t", {"points": 3})})

    def test_roundtrip(self, tmp_path):
        path = self.table().save(tmp_path / "c.json")
        back = ConstantsTable.load(path)
        assert back["a"] == self.table()["a"]
        assert back.to_json() == self.table().to_json()

    def test_require(self):
        t = self.table()
        assert t.require("a").C_fit == 2.0
        with pytest.raises(ConstantsNotFrozenError):
            t.require("b")
        t.set(FittedConstants("b", 1.0, 1.0, "g"))
        with pytest.raises(ConstantsNotFrozenError):
            t.require("b")
        t.freeze()
        assert t.require("b").frozen

    def test_invalid_values(self):
        with pytest.raises(ConstantsError):
            FittedConstants("x", 2.0, 1.0, "g")
        with pytest.raises(ConstantsError):
            FittedConstants("x", 0.0, 1.0, "g")

    @pytest.mark.parametrize("text", ["{not json", "[]", '{"a": {"c_fit": 1}}', '{"a": {"c_fit": 3, "C_fit": 1, "grid_descriptor": "g"}}'])
    def test_corrupted(self, text):
        with pytest.raises(ConstantsFileError):
            ConstantsTable.from_json(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConstantsFileError):
            ConstantsTable.load(tmp_path / "none.json")

    def test_env_override(self, tmp_path, monkeypatch):
        path = self.table().save(tmp_path / "env.json")
        monkeypatch.setenv(cst.ENV_VAR, str(path))
        assert cst.default_constants_path() == path
        assert "a" in cst.get_constants()
        explicit = ConstantsTable()
        assert cst.get_constants(explicit) is explicit
