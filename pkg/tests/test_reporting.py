# Standard Library
import csv
import json
from pathlib import Path

# External Party
import numpy as np
import pytest

# My Modules
from kink_stability.common.template import Outcome
from kink_stability.reporting import render_json
from kink_stability.reporting import write_columns
from kink_stability.reporting import write_json
from kink_stability.reporting import write_table


def test_json_is_versioned_and_sorted():
    text = render_json({"zeta": 1, "alpha": Outcome.PASS})
    document = json.loads(text)
    assert document == {"schema_version": 1, "zeta": 1, "alpha": "pass"}
    assert list(document) == ["alpha", "schema_version", "zeta"]
    assert text.endswith("\n")


def test_json_converts_numpy_values():
    payload = {
        "array": np.arange(3),
        "count": np.int64(4),
        "value": np.float32(0.5),
        "flag": np.bool_(True),
        "path": Path("out"),
    }
    document = json.loads(render_json(payload))
    assert document["array"] == [0, 1, 2]
    assert document["count"] == 4
    assert document["value"] == 0.5
    assert document["flag"] is True
    assert document["path"] == "out"


def test_json_refuses_unknown_objects():
    with pytest.raises(TypeError, match="cannot serialise"):
        render_json({"thing": object()})


def test_write_json_creates_directories(tmp_path):
    path = write_json(tmp_path / "nested" / "report.json", {"a": 1})
    assert json.loads(path.read_text())["a"] == 1


def test_columns_carry_units(tmp_path):
    path = write_columns(
        tmp_path / "kink.csv", {"x": [0.0, 0.5], "H": [0.0, 0.1]}, {"x": "length"}
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "# units: x=length, H=1"
    assert lines[1] == "x,H"
    table = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    assert table["H"][1] == 0.1


def test_table_header_is_the_union_of_keys(tmp_path):
    rows = [{"value": 0.1, "verdict": "pass"}, {"value": 2.0, "error": "bad"}]
    path = write_table(tmp_path / "scan.csv", rows)
    with path.open() as handle:
        read = list(csv.DictReader(handle))
    assert list(read[0]) == ["value", "verdict", "error"]
    assert read[0]["value"] == "0.1"
    assert read[0]["error"] == ""
    assert read[1]["verdict"] == ""
