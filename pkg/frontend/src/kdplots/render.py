"""Render a data cloud with fitted atom chains from solver reports.

Inputs are the solver's own outputs: a versioned JSON report (schema 1) and
measure CSVs with header ``x1,...,xd,w``.  Every measure embedded in the
report (any object carrying ``points`` and ``weights``) is drawn as a
polyline in atom order; extra overlay CSVs can be added.  Output is a single
raster image.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SUPPORTED_SCHEMA = 1


class RenderError(ValueError):
    """Bad report schema or malformed inputs."""


@dataclass(frozen=True)
class FigureJob:
    report_paths: tuple = ()
    data_path: str | None = None
    overlays: tuple = ()
    out_path: str = "figure.png"
    axis_equal: bool = True
    dpi: int = 130


def load_measure_csv(path) -> np.ndarray:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if len(header) < 2 or header[-1] != "w":
            raise RenderError(f"{path}: expected measure CSV header x1,...,xd,w")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise RenderError(f"{path}: no atoms")
    return np.asarray(rows)[:, :-1]


def _walk_measures(node, found, label=""):
    if isinstance(node, dict):
        if "points" in node and "weights" in node:
            pts = np.asarray(node["points"], dtype=float)
            if pts.ndim == 2 and pts.shape[1] >= 1:
                found.append((label or "measure", pts))
            return
        for key, val in node.items():
            _walk_measures(val, found, f"{label}.{key}" if label else str(key))
    elif isinstance(node, list):
        for i, val in enumerate(node):
            _walk_measures(val, found, f"{label}[{i}]")


def load_report_measures(path) -> list:
    path = Path(path)
    try:
        report = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RenderError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(report, dict) or "schema" not in report:
        raise RenderError(f"{path}: missing schema field")
    if report["schema"] != SUPPORTED_SCHEMA:
        raise RenderError(
            f"{path}: schema {report['schema']!r} unsupported (want {SUPPORTED_SCHEMA})"
        )
    found: list = []
    _walk_measures(report, found)
    return found


def _as_xy(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if pts.shape[1] == 1:
        return pts[:, 0], np.zeros(len(pts))
    return pts[:, 0], pts[:, 1]


def render(job: FigureJob) -> Path:
    """Write one raster image for the job; returns the output path."""
    curves: list = []
    for rp in job.report_paths:
        curves.extend(load_report_measures(rp))
    for ov in job.overlays:
        curves.append((Path(ov).stem, load_measure_csv(ov)))
    data = load_measure_csv(job.data_path) if job.data_path else None
    if data is None and not curves:
        raise RenderError("nothing to draw: no data and no measures found")

    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    if data is not None:
        dx, dy = _as_xy(data)
        ax.scatter(dx, dy, s=6, c="0.65", alpha=0.6, linewidths=0, label="data")
    for label, pts in curves:
        cx, cy = _as_xy(pts)
        ax.plot(cx, cy, marker="o", markersize=3.5, linewidth=1.4, label=label)
    if job.axis_equal:
        ax.set_aspect("equal", adjustable="datalim")
    if data is not None or len(curves) > 1:
        ax.legend(loc="best", fontsize=8)
    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=job.dpi)
    plt.close(fig)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plots", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure from reports/CSVs")
    r.add_argument("--report", action="append", default=[],
                   help="report JSON (repeatable); embedded measures become polylines")
    r.add_argument("--data", default=None, help="data measure CSV for the scatter")
    r.add_argument("--overlay", action="append", default=[],
                   help="extra measure CSV polyline (repeatable)")
    r.add_argument("--out", required=True, help="output image path")
    r.add_argument("--no-axis-equal", action="store_true")
    return p


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    job = FigureJob(
        report_paths=tuple(args.report),
        data_path=args.data,
        overlays=tuple(args.overlay),
        out_path=args.out,
        axis_equal=not args.no_axis_equal,
    )
    try:
        out = render(job)
    except (RenderError, FileNotFoundError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        sys.exit(1)
    print(out)
    sys.exit(0)


if __name__ == "__main__":
    main()
