"""CSV and JSON writers for surfaces, fits and forecasts.

Grids are stored internally as ``[reversed time, underwriting]``.  The
exports use the triangle layout instead: one row per underwriting cell and
one column per forward delay cell ``t = r0 - 1 - r``.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

__all__ = ["matrix_csv", "long_csv", "dumps_json", "write_text"]


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def matrix_csv(values, mask=None) -> str:
    """Underwriting-by-delay matrix; cells outside ``mask`` are left empty."""
    values = np.asarray(values, dtype=float)
    r0 = values.shape[0]
    forward = values[::-1, :].T  # [z, t]
    keep = np.ones_like(forward, dtype=bool) if mask is None else np.asarray(mask)[::-1, :].T
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z"] + [f"t{t}" for t in range(r0)])
    for z in range(forward.shape[0]):
        w.writerow([z] + [_fmt(v) if k else "" for v, k in zip(forward[z], keep[z])])
    return buf.getvalue()


def long_csv(values, mask=None, name: str = "value") -> str:
    """Long-form ``t,z,value`` rows for plotting, restricted to ``mask``."""
    values = np.asarray(values, dtype=float)
    r0 = values.shape[0]
    keep = np.ones_like(values, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "z", name])
    for z in range(values.shape[1]):
        for t in range(r0):
            r = r0 - 1 - t
            if keep[r, z]:
                w.writerow([t, z, _fmt(values[r, z])])
    return buf.getvalue()


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
