"""Canonical JSON and CSV emission for experiment reports."""
import csv
import io
import json
import math
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("experiment", "section", "name", "index", "value")


def _clean(obj):
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def canonical_json(data):
    return json.dumps(_clean(data), sort_keys=True, indent=1, allow_nan=False) + "\n"


def report_rows(report):
    """Flat rows with the fixed column set ``CSV_COLUMNS``."""
    name = report.experiment
    rows = []
    for key in sorted(report.scalars):
        rows.append((name, "scalar", key, "", report.scalars[key]["value"]))
    for key in sorted(report.sequences):
        for i, v in enumerate(report.sequences[key]):
            rows.append((name, "sequence", key, i, v))
    for key in sorted(report.checks):
        rows.append((name, "check", key, "", report.checks[key]))
    return rows


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report_rows(report):
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def emit_report(report, fmt, path):
    """Write ``report`` as "json" or "csv".

    JSON output is canonical (sorted keys, fixed formatting) and excludes
    timings, which go to a ``.timings.json`` sidecar next to the file.
    """
    path = Path(path)
    if fmt == "json":
        path.write_text(canonical_json(report.to_dict()))
        side = path.with_suffix(".timings.json")
        side.write_text(canonical_json(report.timings))
    elif fmt == "csv":
        path.write_text(report_csv(report))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def write_json(data, path):
    Path(path).write_text(canonical_json(data))
    return Path(path)
