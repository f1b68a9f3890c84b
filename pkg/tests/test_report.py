import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from almgren.errors import ConfigError
from almgren.report import (
    CSV_COLUMNS,
    SCHEMA,
    RunReport,
    blowup_csv_text,
    csv_text,
    dumps,
    emit,
    exit_code,
    loads,
    read_report,
    svg_text,
    table_text,
)
from conftest import SCENARIOS

SVG = "{http://www.w3.org/2000/svg}"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(x):
    assert loads(dumps({"x": x}))["x"] == x


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(ValueError):
        dumps([1.0, bad])
    with pytest.raises(ValueError):
        table_text(["a"], [[bad]])


def test_dumps_plain_types():
    text = dumps({"a": np.arange(3), "b": np.float64(0.1), "c": (True, None), "d": "x\"y"})
    assert loads(text) == {"a": [0, 1, 2], "b": 0.1, "c": [True, None], "d": 'x"y'}
    assert "0.10000000000000001" in text
    assert loads(dumps(2.0)) == 2.0 and isinstance(loads(dumps(2.0)), float)


def test_table_text_quotes():
    text = table_text(["a", "b", "c"], [[1, "x,y", True]])
    assert text == 'a,b,c\n1,"x,y",true\n'


def test_exit_codes():
    assert exit_code({"classified": True, "audits_passed": True}) == 0
    assert exit_code({"classified": True, "audits_passed": False}) == 4
    assert exit_code({"classified": False, "audits_passed": True}) == 5
    assert exit_code({}) == 5


@pytest.mark.parametrize("name", SCENARIOS)
def test_report_contract(reports, name):
    rep = reports[name]
    assert rep.schema == SCHEMA
    assert rep.exit_code == 0
    lines = csv_text(rep).splitlines()
    header = lines[0].split(",")
    assert tuple(header[:5]) == CSV_COLUMNS
    assert header[5:] == rep.profile["phi_labels"]
    assert len(lines) - 1 == len(rep.profile["radii"])
    assert all(len(l.split(",")) == len(header) for l in lines[1:])
    first = [float(v) for v in lines[1].split(",")]
    assert first[0] == rep.profile["radii"][0] and first[1] == rep.profile["H"][0]
    blines = blowup_csv_text(rep).splitlines()
    assert len(blines) - 1 == len(rep.blowup["lambdas"])


@pytest.mark.parametrize("name", SCENARIOS)
def test_svg_polyline_per_radius(reports, name):
    rep = reports[name]
    root = ET.fromstring(svg_text(rep))
    lines = [el for el in root.iter(f"{SVG}polyline") if el.get("class") == "data"]
    assert len(lines) == 2
    for el in lines:
        assert len(el.get("points").split()) == len(rep.profile["radii"])


def test_emit_and_round_trip(reports, tmp_path):
    rep = reports["phi1_interval"]
    paths = emit(rep, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == sorted([
        "phi1_interval.csv", "phi1_interval_blowup.csv", "phi1_interval.json",
        "phi1_interval.svg", "phi1_interval.timing.json",
    ])
    back = read_report(tmp_path / "phi1_interval.json")
    assert back == rep
    assert dumps(back.to_dict()) == (tmp_path / "phi1_interval.json").read_text()
    data = json.loads((tmp_path / "phi1_interval.json").read_text())
    assert data["schema"] == "almgren-report/1"
    assert "timings" not in data and "wall_clock_seconds" not in json.dumps(data)
    timing = json.loads((tmp_path / "phi1_interval.timing.json").read_text())
    assert timing["wall_clock_seconds"]["total"] > 0


def test_emit_subset_and_errors(reports, tmp_path):
    rep = reports["phi1_interval"]
    paths = emit(rep, tmp_path, formats=("svg",), timing=False)
    assert [p.name for p in paths] == ["phi1_interval.svg"]
    with pytest.raises(ConfigError):
        emit(rep, tmp_path, formats=("pdf",))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit(rep, blocker / "sub")


def test_read_report_errors(tmp_path):
    with pytest.raises(ConfigError):
        read_report(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        read_report(bad)
    bad.write_text(json.dumps({"schema": "other/2"}))
    with pytest.raises(ConfigError, match="schema"):
        read_report(bad)


def test_runreport_from_dict_requires_schema():
    with pytest.raises(ConfigError):
        RunReport.from_dict({})
