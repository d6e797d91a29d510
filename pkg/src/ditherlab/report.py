"""Report container and canonical serialization.

Reports are nested dictionaries of plain Python values. The JSON form is
canonical: keys keep their insertion order, floats render through repr
(shortest round-trip), and NaN or infinity are rejected, so two runs that
compute identical numbers emit identical bytes.

The CSV form flattens the nesting into dotted column names with one header
row and one value row, for spreadsheet-style consumption.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["RunReport", "plain_values", "canonical_json", "csv_text", "flatten_payload"]


def plain_values(obj):
    """Recursively convert numpy scalars and arrays to plain Python values."""
    if isinstance(obj, dict):
        return {str(k): plain_values(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain_values(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain_values(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise DomainError(f"cannot serialize value of type {type(obj).__name__}")


def canonical_json(payload: dict) -> str:
    return json.dumps(plain_values(payload), indent=2, allow_nan=False) + "\n"


def flatten_payload(payload, prefix: str = "") -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = []
    if isinstance(payload, dict):
        for key, value in payload.items():
            name = f"{prefix}.{key}" if prefix else str(key)
            rows.extend(flatten_payload(value, name))
    elif isinstance(payload, (list, tuple)):
        for index, value in enumerate(payload):
            rows.extend(flatten_payload(value, f"{prefix}[{index}]"))
    else:
        rows.append((prefix, payload))
    return rows


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def csv_text(payload: dict) -> str:
    rows = flatten_payload(plain_values(payload))
    header = ",".join(_csv_cell(name) for name, _ in rows)
    values = ",".join(_csv_cell(value) for _, value in rows)
    return header + "\n" + values + "\n"


@dataclass(frozen=True)
class RunReport:
    """A finished run: a payload dictionary with canonical renderings."""

    payload: dict

    def json(self) -> str:
        return canonical_json(self.payload)

    def csv(self) -> str:
        return csv_text(self.payload)

    def failed_checks(self) -> list[str]:
        checks = self.payload.get("checks", [])
        return [c["name"] for c in checks if c.get("status") == "fail"]
