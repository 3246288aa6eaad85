"""Output writers: JSON reports, CSV tables and 8-bit PGM heatmaps."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .grid import ComplexField


def _clean(obj):
    # JSON has no NaN/inf; emit null instead
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def field_rows(u: ComplexField):
    X, Y = u.grid.mesh()
    v = u.values
    return zip(X.ravel(), Y.ravel(), v.real.ravel(), v.imag.ravel(), np.abs(v).ravel())


def write_field_csv(path, u: ComplexField) -> Path:
    return write_csv(path, ["x", "y", "re", "im", "abs"], field_rows(u))


def to_gray(values: np.ndarray) -> np.ndarray:
    """Map min to 0 and max to 255; a constant array maps to 0."""
    v = np.asarray(values, float)
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    if hi <= lo:
        return np.zeros(v.shape, np.uint8)
    return np.rint(255 * (v - lo) / (hi - lo)).astype(np.uint8)


def write_pgm(path, values: np.ndarray) -> Path:
    """Binary PGM of a ``[i, j]``-indexed array, ``x`` to the right and ``y`` up."""
    img = to_gray(values).T[::-1]
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    return np.frombuffer(data, np.uint8, count=w * h, offset=m.end()).reshape(h, w)
