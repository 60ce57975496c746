"""Deterministic CSV/JSON writers for simulation artifacts.

Every float is rendered with repr-faithful precision so identical inputs
produce byte-identical files. Tabular data can alternatively be written as
JSON (same rows, explicit header) when the CLI is asked for that format.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dynamics import Trajectory

VERSION = "0.1.0"


def fmt(x) -> str:
    """Deterministic, round-trip-safe float formatting."""
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    xf = float(x)
    if math.isnan(xf):
        return "nan"
    return format(xf, ".17g")


def write_table(path: Path, header: list[str], rows, fileformat: str = "csv") -> Path:
    """Write one table as CSV or as a JSON object with header and rows."""
    path = Path(path)
    if fileformat == "csv":
        lines = [",".join(header)]
        lines += [",".join(fmt(c) for c in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fileformat == "json":
        payload = {"header": header, "rows": [[None if (isinstance(c, float) and math.isnan(c)) else c for c in map(_jsonable, row)] for row in rows]}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown table format {fileformat!r}")
    return path


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path


def trajectory_rows(traj: Trajectory, t_p: float = 1.0):
    """Rows of the trajectory table; times are reported in units of t_p."""
    for t, amp in zip(traj.times, traj.amplitudes):
        yield (
            t / t_p,
            amp[0].real, amp[0].imag,
            amp[1].real, amp[1].imag,
            amp[2].real, amp[2].imag,
            abs(amp[0]) ** 2, abs(amp[1]) ** 2, abs(amp[2]) ** 2,
        )


TRAJECTORY_HEADER = ["t", "re_c1", "im_c1", "re_c0", "im_c0", "re_cm1", "im_cm1",
                     "p1", "p0", "pm1"]


def write_trajectory(path: Path, traj: Trajectory, t_p: float = 1.0,
                     fileformat: str = "csv") -> Path:
    return write_table(path, TRAJECTORY_HEADER, trajectory_rows(traj, t_p), fileformat)


def write_grid(path: Path, s_grid_pi, knob_grid, matrix, fileformat: str = "csv") -> Path:
    """Sweep matrix: first row is the knob grid, first column the areas in pi units."""
    header = [""] + [fmt(k) for k in knob_grid]
    rows = [[s] + list(row) for s, row in zip(s_grid_pi, np.asarray(matrix))]
    return write_table(path, header, rows, fileformat)


def read_grid_csv(path: Path):
    """Inverse of write_grid for the CSV flavor; returns (s_pi, knobs, matrix)."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    knobs = np.array([float(x) for x in lines[0].split(",")[1:]])
    s_pi = []
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        s_pi.append(float(cells[0]))
        rows.append([float(x) for x in cells[1:]])
    return np.array(s_pi), knobs, np.array(rows)


@dataclass
class RunManifest:
    """Record of one CLI run: inputs, outputs and provenance."""

    command: str
    parameters: dict
    outputs: list[str]
    duration_s: float
    version: str = VERSION

    def write(self, path: Path) -> Path:
        return write_json(path, asdict(self))
