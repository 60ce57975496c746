"""Render simulator artifacts (CSV/JSON tables + metadata) into images.

Strictly downstream of the simulation CLI: every table is described by a
metadata JSON whose ``kind`` selects the figure layout (dynamics, heatmap,
curves or fringes). Axis labels and units come from the metadata, never from
here, and the declared grids are validated against the table shapes before
anything is drawn.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless rendering only

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import LogNorm


class RenderValidationError(ValueError):
    """Metadata and data disagree, or there is nothing to draw."""


@dataclass
class PlotJob:
    """One rendering task: metadata plus the tables it points at."""

    metadata_path: Path
    output_path: Path | None = None
    normalize: bool = False
    metadata: dict = field(init=False)

    def __post_init__(self):
        self.metadata_path = Path(self.metadata_path)
        if not self.metadata_path.exists():
            raise RenderValidationError(f"metadata file {self.metadata_path} does not exist")
        self.metadata = json.loads(self.metadata_path.read_text(encoding="utf-8"))
        if "kind" not in self.metadata:
            raise RenderValidationError("metadata is missing the figure kind")
        if self.output_path is None:
            stem = self.metadata_path.name.removesuffix("_meta.json").removesuffix(".json")
            self.output_path = self.metadata_path.with_name(stem + ".png")
        self.output_path = Path(self.output_path)

    def table_path(self, name: str) -> Path:
        return self.metadata_path.parent / name


def read_table(path: Path, fileformat: str) -> tuple[list[str], np.ndarray]:
    """Load a table written by the simulator (CSV or JSON flavor)."""
    if not path.exists():
        raise RenderValidationError(f"table {path} does not exist")
    if fileformat == "json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        header = payload["header"]
        rows = payload["rows"]
        data = np.array(
            [[np.nan if cell in (None, "") else float(cell) for cell in row] for row in rows]
        )
        return header, data
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise RenderValidationError(f"table {path} is empty")
    header = lines[0].split(",")
    data = np.array(
        [[np.nan if cell in ("",) else float(cell) for cell in line.split(",")]
         for line in lines[1:]]
    )
    if data.size == 0:
        raise RenderValidationError(f"table {path} has no data rows")
    return header, data


def _columns(header, data, names):
    idx = {h: i for i, h in enumerate(header)}
    missing = [n for n in names if n not in idx]
    if missing:
        raise RenderValidationError(f"table is missing columns {missing}")
    return [data[:, idx[n]] for n in names]


def _render_dynamics(job: PlotJob) -> None:
    meta = job.metadata
    fmt = meta.get("format", "csv")
    pulse_header, pulse = read_table(job.table_path(meta["pulse_table"]), fmt)
    traj_header, traj = read_table(job.table_path(meta["trajectory_table"]), fmt)
    t_f, omega_p, omega_s = _columns(pulse_header, pulse, ["t", "omega_p", "omega_s"])
    t, p1, p0, pm1 = _columns(traj_header, traj, ["t", "p1", "p0", "pm1"])
    if pulse.shape[0] != traj.shape[0]:
        raise RenderValidationError("pulse and trajectory tables have different lengths")
    labels = meta.get("labels", {})
    fig, (ax_fields, ax_pops) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_fields.plot(t_f, omega_p, label="pump")
    ax_fields.plot(t_f, omega_s, label="Stokes")
    ax_fields.set_ylabel(labels.get("fields", "field"))
    ax_fields.legend(loc="upper right", fontsize="small")
    ax_fields.grid(alpha=0.3)
    ax_pops.plot(t, p1, label="P(+1)")
    ax_pops.plot(t, p0, label="P(0)")
    ax_pops.plot(t, pm1, label="P(-1)")
    ax_pops.set_xlabel(labels.get("time", "t"))
    ax_pops.set_ylabel(labels.get("populations", "population"))
    ax_pops.legend(loc="center left", fontsize="small")
    ax_pops.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(job.output_path, dpi=150)
    plt.close(fig)


def _render_heatmap(job: PlotJob) -> None:
    meta = job.metadata
    header, data = read_table(job.table_path(meta["table"]), meta.get("format", "csv"))
    s_grid = np.asarray(meta["s_grid_pi"], dtype=float)
    knobs = np.asarray(meta["knob_grid_tp"], dtype=float)
    matrix = data[:, 1:]
    if matrix.shape != (s_grid.size, knobs.size):
        raise RenderValidationError(
            f"grid table shape {matrix.shape} does not match the declared "
            f"{s_grid.size}x{knobs.size} grid"
        )
    fig, ax = plt.subplots(figsize=(6.5, 5))
    norm = None
    if meta.get("log_scale"):
        positive = matrix[matrix > 0]
        if positive.size == 0:
            raise RenderValidationError("log-scale heatmap has no positive values")
        norm = LogNorm(vmin=max(positive.min(), 1e-12), vmax=matrix.max())
    mesh = ax.pcolormesh(knobs, s_grid, matrix, norm=norm, shading="nearest",
                         cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=meta.get("metric", ""))
    ax.set_xlabel(meta["x_label"])
    ax.set_ylabel(meta["y_label"])
    if meta.get("scheme"):
        ax.set_title(f"{meta.get('metric', '')} ({meta['scheme']})", fontsize="medium")
    fig.tight_layout()
    fig.savefig(job.output_path, dpi=150)
    plt.close(fig)


def _render_curves(job: PlotJob) -> None:
    meta = job.metadata
    fmt = meta.get("format", "csv")
    entries = meta.get("curves", [])
    if not entries:
        raise RenderValidationError("curves metadata lists no curves")
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for entry in entries:
        header, data = read_table(job.table_path(entry["table"]), fmt)
        if data.shape[1] < 2:
            raise RenderValidationError(f"curve table {entry['table']} needs two columns")
        ax.plot(data[:, 0], data[:, 1], label=entry.get("label"))
    if meta.get("log_y"):
        ax.set_yscale("log")
    if meta.get("threshold") is not None:
        ax.axhline(meta["threshold"], color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel(meta["x_label"])
    ax.set_ylabel(meta["y_label"])
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(job.output_path, dpi=150)
    plt.close(fig)


def _render_fringes(job: PlotJob) -> None:
    meta = job.metadata
    fmt = meta.get("format", "csv")
    entries = meta.get("fringes", [])
    if not entries:
        raise RenderValidationError("fringes metadata lists no fringes")
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for entry in entries:
        header, data = read_table(job.table_path(entry["table"]), fmt)
        phase, signal = _columns(header, data, ["phase", "signal"])
        if job.normalize:
            fit = entry.get("fit")
            if not fit or fit.get("contrast", 0.0) <= 0.0:
                raise RenderValidationError(
                    f"fringe {entry.get('label')} carries no usable fit for normalization"
                )
            signal = (signal - fit.get("offset", 0.0)) / fit["contrast"]
        ax.plot(phase, signal, label=entry.get("label"))
    ax.set_xlabel(meta["x_label"])
    y_label = meta["y_label"]
    ax.set_ylabel(f"{y_label} (normalized)" if job.normalize else y_label)
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(job.output_path, dpi=150)
    plt.close(fig)


_RENDERERS = {
    "dynamics": _render_dynamics,
    "heatmap": _render_heatmap,
    "curves": _render_curves,
    "fringes": _render_fringes,
}


def render(job: PlotJob) -> Path:
    """Validate the job and write its image; returns the output path."""
    kind = job.metadata["kind"]
    try:
        renderer = _RENDERERS[kind]
    except KeyError:
        raise RenderValidationError(f"unknown figure kind {kind!r}") from None
    renderer(job)
    return job.output_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a simulator metadata file and its tables into an image.",
    )
    parser.add_argument("metadata", help="path to a *_meta.json file")
    parser.add_argument("--out", default=None, help="output image path (default: alongside)")
    parser.add_argument("--normalize", action="store_true",
                        help="normalize fringes by their fitted contrast and offset")
    args = parser.parse_args(argv)
    try:
        job = PlotJob(args.metadata, output_path=args.out, normalize=args.normalize)
        out = render(job)
    except RenderValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
