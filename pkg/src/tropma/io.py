"""File formats: canonical JSON, Green-function files and Monge-Ampere problems.

A Green-function file is GreenData JSON with an optional periodic part::

    {"lattice": {"dim": 1, "basis": [["1"]]}, "b": [["1"]], "c": ["0"],
     "periodic": "expr:0.01*cos(1)"}

``periodic`` (and the ``f`` entry of a problem file) is either
``expr:<harmonic expression>`` or ``csv:<path>`` with grid samples; relative
CSV paths resolve against the directory of the JSON file.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InputError
from .green import GreenData, GreenFunction
from .lattice import Lattice
from .periodic import GridPart, PeriodicPart, parse_harmonics, zero_part


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return json.dumps(None)
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, type(None), str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path | str, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


def read_json(path: Path | str) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as err:
        raise InputError(f"file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"{path}: invalid JSON ({err})") from err


def periodic_from_spec(spec: str | None, lattice: Lattice, base: Path | None = None) -> PeriodicPart:
    if spec is None or spec == "":
        return zero_part(lattice)
    if not isinstance(spec, str):
        raise InputError("periodic part must be a string 'expr:...' or 'csv:...'")
    kind, _, body = spec.partition(":")
    if kind == "expr":
        return parse_harmonics(body, lattice)
    if kind == "csv":
        path = Path(body)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            return GridPart.from_csv(path.read_text(), lattice)
        except FileNotFoundError as err:
            raise InputError(f"grid file not found: {path}") from err
    raise InputError(f"unknown periodic spec {spec!r}; use 'expr:...' or 'csv:PATH'")


def load_green(path: Path | str) -> GreenFunction:
    path = Path(path)
    obj = read_json(path)
    data = GreenData.from_json(obj)
    return GreenFunction(data, periodic_from_spec(obj.get("periodic"), data.lattice, path.parent))


def load_problem(path: Path | str) -> tuple[GreenData, int, PeriodicPart]:
    """``(data, grid_n, f_raw)`` from a problem file."""
    path = Path(path)
    obj = read_json(path)
    try:
        data = GreenData.from_json(obj["green_data"])
        grid_n = int(obj.get("grid_n", 64))
    except (KeyError, TypeError, ValueError) as err:
        raise InputError(f"{path}: malformed problem ({err})") from err
    return data, grid_n, periodic_from_spec(obj.get("f", "expr:0"), data.lattice, path.parent)


def grid_csv(samples: np.ndarray) -> str:
    """Row-major grid samples with a ``n1,...,nd`` header line."""
    samples = np.asarray(samples, dtype=float)
    lines = [",".join(str(n) for n in samples.shape)]
    rows = samples.reshape(-1, samples.shape[-1])
    lines += [",".join(fmt_float(float(v)) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
