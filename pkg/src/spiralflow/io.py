"""Flat-file output: RFC 4180 CSV with 17 significant digits and JSON summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    if isinstance(x, (str, bytes)):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, columns):
    """Write equal-length ``columns`` under ``header`` (one row per index)."""
    cols = [np.asarray(c) for c in columns]
    n = {c.size for c in cols}
    if len(n) != 1:
        raise ValueError("columns must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])
    return path


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def summary(command, config, results, checks, timing_ms):
    return {
        "version": __version__,
        "command": command,
        "config": config,
        "results": results,
        "checks": checks,
        "timing_ms": timing_ms,
    }


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(jsonable(obj), indent=2, allow_nan=False)
    path.write_text(text + "\n")
    return path
