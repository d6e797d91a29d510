import json

import numpy as np
import pytest

from ditherlab.errors import DomainError
from ditherlab.report import (
    RunReport,
    canonical_json,
    csv_text,
    flatten_payload,
    plain_values,
)


def test_plain_values_converts_numpy_scalars_and_arrays():
    payload = {
        "count": np.int64(3),
        "value": np.float64(0.25),
        "flag": np.bool_(True),
        "row": np.array([1.5, 2.5]),
        "nested": {"inner": np.int32(7)},
    }
    plain = plain_values(payload)
    assert plain == {
        "count": 3,
        "value": 0.25,
        "flag": True,
        "row": [1.5, 2.5],
        "nested": {"inner": 7},
    }
    assert isinstance(plain["count"], int)
    assert isinstance(plain["flag"], bool)
    with pytest.raises(DomainError):
        plain_values({"bad": object()})


def test_canonical_json_is_stable_and_parseable():
    payload = {"b": 1.0 / 3.0, "a": [1, 2, {"z": None}], "ok": True}
    text = canonical_json(payload)
    assert text == canonical_json(payload)
    assert text.endswith("\n")
    parsed = json.loads(text)
    # repr-level float fidelity survives the round trip.
    assert parsed["b"] == 1.0 / 3.0
    # Insertion order is preserved, not sorted.
    assert list(parsed.keys()) == ["b", "a", "ok"]


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_flatten_payload_dotted_keys():
    payload = {"a": {"b": 1, "c": [10, {"d": 2}]}, "e": None}
    flat = flatten_payload(payload)
    assert flat == [("a.b", 1), ("a.c[0]", 10), ("a.c[1].d", 2), ("e", None)]


def test_csv_text_header_and_quoting():
    payload = {"name": 'say "hi", twice', "x": 0.1, "ok": False, "none": None}
    lines = csv_text(payload).splitlines()
    assert len(lines) == 2
    assert lines[0] == "name,x,ok,none"
    assert lines[1] == '"say ""hi"", twice",0.1,false,'


def test_run_report_failed_checks():
    payload = {
        "checks": [
            {"name": "one", "status": "pass", "detail": ""},
            {"name": "two", "status": "fail", "detail": "boom"},
        ]
    }
    report = RunReport(payload=payload)
    assert report.failed_checks() == ["two"]
    assert json.loads(report.json())["checks"][1]["name"] == "two"
    assert report.csv().startswith("checks[0].name")
