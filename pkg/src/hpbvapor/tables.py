"""
Deterministic CSV/JSON writers and a unit-aware CSV reader.

CSV: ',' delimiter, '.' decimal point, mandatory header, floats written
with 17 significant digits so a read-back is lossless.  Column names carry
their unit after the last underscore (``detuning_GHz``, ``power_mW``);
:func:`read_columns` converts such columns to SI.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "format_value",
    "csv_text",
    "json_text",
    "write_text",
    "read_columns",
    "column_unit_scale",
]

SCHEMA_VERSION = 1

_UNITS = {
    "GHz": 1e9, "MHz": 1e6, "kHz": 1e3, "Hz": 1.0,
    "mW": 1e-3, "W": 1.0,
    "T": 1.0, "mT": 1e-3,
    "K": 1.0,
    "mm": 1e-3, "m": 1.0,
}


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def json_text(payload: dict) -> str:
    """Versioned, key-sorted JSON document."""
    body = {"schema_version": SCHEMA_VERSION, **_plain(payload)}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def column_unit_scale(name: str) -> float:
    """SI factor implied by a column name's unit suffix (1 if none)."""
    unit = name.rpartition("_")[2]
    return _UNITS.get(unit, 1.0) if "_" in name else 1.0


def read_columns(path: str | os.PathLike, columns: Sequence[str], si: bool = True) -> dict[str, np.ndarray]:
    """Read named numeric columns from a headed CSV file.

    Raises ``LookupError`` when a column is missing and ``ValueError`` for
    non-numeric cells.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r]
    index = {name: i for i, name in enumerate(header)}
    out = {}
    for name in columns:
        if name not in index:
            raise LookupError(f"{path}: no column {name!r} (have {', '.join(header)})")
        j = index[name]
        try:
            values = np.array([float(r[j]) for r in rows])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: column {name!r}: {exc}") from None
        out[name] = values * column_unit_scale(name) if si else values
    return out
