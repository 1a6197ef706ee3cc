"""Snapshot and diagnostics files.

A snapshot is two files sharing a stem: ``<stem>.bin`` holds the fields
back to back as little-endian float64 in C (row-major) order and
``<stem>.json`` describes them.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .grid import FieldState, Grid

SNAPSHOT_FIELDS = ("u", "v", "theta", "p")
DIAGNOSTIC_COLUMNS = ("t", "div_norm", "kinetic_energy", "theta_min", "theta_max")
_DTYPE = "<f8"


def write_snapshot(state: FieldState, grid: Grid, path, stem: str = "snapshot"):
    """Write ``state`` and return the ``(header_path, data_path)`` pair."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    fields, offset, chunks = [], 0, []
    for name in SNAPSHOT_FIELDS:
        arr = np.ascontiguousarray(getattr(state, name), dtype=_DTYPE)
        fields.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
        chunks.append(arr.tobytes(order="C"))
    header = {
        "nx": grid.nx,
        "ny": grid.ny,
        "lx": grid.lx,
        "t": float(state.t),
        "dtype": "float64",
        "byte_order": "little",
        "order": "row-major",
        "fields": fields,
        "data_file": f"{stem}.bin",
    }
    data_path = path / f"{stem}.bin"
    header_path = path / f"{stem}.json"
    data_path.write_bytes(b"".join(chunks))
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return header_path, data_path


def read_snapshot(header_path):
    """Inverse of :func:`write_snapshot`; returns ``(grid, state)``."""
    header_path = Path(header_path)
    header = json.loads(header_path.read_text())
    raw = (header_path.parent / header["data_file"]).read_bytes()
    arrays = {}
    for fld in header["fields"]:
        count = int(np.prod(fld["shape"]))
        arr = np.frombuffer(raw, dtype=_DTYPE, count=count, offset=fld["offset"])
        arrays[fld["name"]] = arr.reshape(fld["shape"]).astype(float)
    grid = Grid(header["nx"], header["ny"], header["lx"])
    return grid, FieldState(arrays["u"], arrays["v"], arrays["theta"], arrays["p"], header["t"])


def diagnostics_csv(rows) -> str:
    """CSV text for a sequence of diagnostics dicts (extra keys are ignored)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DIAGNOSTIC_COLUMNS)
    for row in rows:
        w.writerow([repr(float(row[c])) for c in DIAGNOSTIC_COLUMNS])
    return buf.getvalue()


def write_diagnostics(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(diagnostics_csv(rows))
    return path
