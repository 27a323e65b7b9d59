"""Writing and reading experiment reports (JSON, CSV, plot-data tables)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .experiments import ExperimentReport

FLOAT_FMT = "%.17g"

# leading CSV columns per experiment; other scalar record fields follow in first-seen order
COLUMNS = {
    "approx": ["N", "s", "eps", "sup_err_H34", "fitted_slope"],
    "illposed": ["kind", "t", "t_rescaled", "size_u_Hs", "size_v_Hs", "dist_Hs", "dist_H34"],
    "counterexample": ["N", "s", "b", "ratio", "norm_f", "fitted_slope"],
    "resonance": ["kind", "N1", "N2", "N3", "H", "L1", "L2", "L3", "case", "bound", "estimate", "ratio"],
    "suite": ["oracle", "value", "threshold", "passed"],
}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def _json_safe(obj):
    # non-finite floats become strings so the file stays strict JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _json_restore(obj):
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _json_restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_restore(v) for v in obj]
    return obj


def _scalar_columns(name, records):
    cols = list(COLUMNS.get(name, []))
    for r in records:
        for k, v in r.items():
            if not isinstance(v, (list, dict)) and k not in cols:
                cols.append(k)
    return cols


def write_csv(report: ExperimentReport, path) -> Path:
    """Scalar record fields as a table; list-valued fields stay in the JSON only."""
    path = Path(path)
    cols = _scalar_columns(report.name, report.records)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in report.records:
            w.writerow([_cell(r.get(c)) for c in cols])
    return path


def write_report(report: ExperimentReport, output_dir, stem=None) -> dict:
    """Write ``<stem>.json`` and ``<stem>.csv``; returns the paths written."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or report.name
    jp = out / f"{stem}.json"
    jp.write_text(json.dumps(_json_safe(report.to_dict()), indent=2, allow_nan=False) + "\n")
    return {"json": jp, "csv": write_csv(report, out / f"{stem}.csv")}


def read_report(path) -> ExperimentReport:
    return ExperimentReport.from_dict(_json_restore(json.loads(Path(path).read_text())))


def emit_plot_data(report: ExperimentReport, output_dir) -> list[Path]:
    """One CSV per fit or series with columns ``x, y, fit`` (``fit`` blank when not fitted)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for label, f in report.fits.items():
        p = out / f"{report.name}_{label}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "fit"])
            for x, y, z in zip(f.x, f.y, f.line()):
                w.writerow([_cell(float(x)), _cell(float(y)), _cell(z)])
        paths.append(p)
    return paths
