"""CSV and record writers shared by the library and the CLI."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def write_csv(path, columns: Mapping[str, Sequence[float]], comment: str | None = None) -> Path:
    """Write equal-length columns with a header row and 17-digit decimals.

    ``comment`` (if given) becomes a leading ``#`` line.
    """
    path = Path(path)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append(",".join(names))
    for row in data:
        lines.append(",".join(format(float(x), ".17g") for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    names = rows[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]]).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(format(float(obj), ".17g"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_record(path, record: Mapping, comment: str | None = None) -> Path:
    """JSON record with sorted keys; an optional comment goes in ``_comment``."""
    path = Path(path)
    payload = dict(_clean(dict(record)))
    if comment:
        payload = {"_comment": comment, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
