"""Report serialization: versioned JSON plus CSV side files.

Reports are deterministic given the same inputs and seed: keys are sorted,
floats use repr round-tripping, and no timestamps are embedded.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..measures import DiscreteMeasure, save_measure_csv
from ..transport import Coupling

SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if isinstance(obj, DiscreteMeasure):
        return measure_payload(obj)
    return repr(obj)


def measure_payload(mu: DiscreteMeasure) -> dict:
    return {
        "points": mu.points.tolist(),
        "weights": mu.weights.tolist(),
    }


def build_report(command: str, seed: int, payload: dict, checks: dict) -> dict:
    """Assemble the versioned report envelope.

    checks maps name -> {passed: bool, ...detail}; the report's overall
    ``passed`` requires every check to pass.
    """
    return {
        "schema": SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "passed": all(c.get("passed", False) for c in checks.values()) if checks else True,
        "checks": _jsonable(checks),
        **_jsonable(payload),
    }


def write_report(report: dict, out_dir, name: str = "report.json") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return path


def write_measure(mu: DiscreteMeasure, out_dir, name: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    save_measure_csv(mu, path)
    return path


def write_coupling(pi: Coupling, out_dir, name: str = "coupling.csv") -> Path:
    """Sparse triplet export: one ``i,j,mass`` row per positive entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with path.open("w") as fh:
        fh.write("i,j,mass\n")
        ii, jj = np.nonzero(pi.mass)
        for i, j in zip(ii, jj):
            fh.write(f"{i},{j},{pi.mass[i, j]!r}\n")
    return path
