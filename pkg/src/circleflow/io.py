"""File formats: complex JSON, per-vertex JSON maps, trace CSV and report JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .complex import ComplexError, ComplexTopology, complex_from_json, vertex_values
from .flow import FlowTrace

TRACE_COLUMNS = ("time", "vertex_id", "u", "r", "T", "residual")


class InputError(ValueError):
    """Malformed or unreadable input file; the message names the file and location."""


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _finite(obj):
    # JSON has no inf/nan; emit null for them
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    text = json.dumps(obj, default=_default, indent=2)
    text = json.dumps(_finite(json.loads(text)), indent=2)
    path.write_text(text + "\n")
    return path


def load_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def read_complex(path) -> ComplexTopology:
    data = load_json(path)
    try:
        return complex_from_json(data)
    except ComplexError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_complex(cx: ComplexTopology, path) -> Path:
    return write_json(cx.to_json(), path)


def read_vertex_map(path, cx: ComplexTopology, what: str) -> np.ndarray:
    """Per-vertex ``{vertex_id: value}`` JSON file, ordered by the complex."""
    data = load_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object mapping vertex ids to numbers")
    for key, val in data.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise InputError(f"{path}: field {key!r}: expected a number, got {val!r}")
    try:
        return vertex_values(cx, data, what)
    except ComplexError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_trace_csv(trace: FlowTrace, path) -> Path:
    path = Path(path)
    r = trace.r
    res = trace.residual
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for k, t in enumerate(trace.times):
            for j, v in enumerate(trace.vertex_ids):
                w.writerow([repr(float(t)), v, repr(float(trace.u[k, j])), repr(float(r[k, j])), repr(float(trace.T[k, j])), repr(float(res[k, j]))])
    return path


def read_trace_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("time", "u", "r", "T", "residual"):
            row[key] = float(row[key])
    return rows
