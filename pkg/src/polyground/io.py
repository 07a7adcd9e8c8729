"""JSON persistence for fields, configs and reports (schema_version 1)."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .radial import RadialField, RadialGrid

SCHEMA_VERSION = 1
FIELD_KEYS = ("dim", "radius", "n", "values")


class SchemaError(ValueError):
    """A document does not match the expected schema; ``key`` names the offender."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _num(x: float) -> str:
    return format(float(x), ".17g")


def field_to_text(u: RadialField) -> str:
    vals = ",\n    ".join(_num(v) for v in u.values)
    return (
        "{\n"
        f'  "schema_version": {SCHEMA_VERSION},\n'
        f'  "dim": {u.grid.dim},\n'
        f'  "radius": {_num(u.grid.radius)},\n'
        f'  "n": {u.grid.n},\n'
        f'  "values": [\n    {vals}\n  ]\n'
        "}\n"
    )


def save_field(u: RadialField, path) -> None:
    Path(path).write_text(field_to_text(u))


def field_from_dict(doc: Any) -> RadialField:
    if not isinstance(doc, dict):
        raise SchemaError("document", "expected a JSON object")
    for k in FIELD_KEYS:
        if k not in doc:
            raise SchemaError(k, "missing key")
    sv = doc.get("schema_version", SCHEMA_VERSION)
    if sv != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {sv!r}")
    dim, n, radius, values = doc["dim"], doc["n"], doc["radius"], doc["values"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 3:
        raise SchemaError("dim", f"expected an integer >= 3, got {dim!r}")
    if isinstance(n, bool) or not isinstance(n, int) or n < 8:
        raise SchemaError("n", f"expected an integer >= 8, got {n!r}")
    if isinstance(radius, bool) or not isinstance(radius, (int, float)) or not radius > 0:
        raise SchemaError("radius", f"expected a positive number, got {radius!r}")
    if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
        raise SchemaError("values", "expected a list of numbers")
    if len(values) != n:
        raise SchemaError("values", f"length {len(values)} does not match n = {n}")
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SchemaError("values", "non-finite entry")
    return RadialField(RadialGrid(dim, float(radius), n), arr)


def read_json(path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("path", f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("document", f"invalid JSON in {path}: {exc}") from exc


def load_field(path) -> RadialField:
    return field_from_dict(read_json(path))


def _clean(obj: Any) -> Any:
    """Make an object strict-JSON safe: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def report_text(doc: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(_clean(doc))
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(doc: dict, path) -> None:
    Path(path).write_text(report_text(doc))
