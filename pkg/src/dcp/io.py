"""CSV and JSON writers with 17 significant digits."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path, header, columns) -> Path:
    """Write equal-length columns under ``header``."""
    path = Path(path)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len(cols) != len(header):
        raise ValueError("header and columns differ in length")
    if len({c.size for c in cols}) > 1:
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in zip(*cols))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else fmt(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
