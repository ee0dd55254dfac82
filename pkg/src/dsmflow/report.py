"""Trace CSV and report JSON writers."""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

TRACE_COLUMNS = ("t", "residual_norm", "u_norm", "a", "ratio_v_over_a", "step")
REPORT_SCHEMA = "dsmflow.report/1"


def _num(x):
    if x is None:
        return ""
    x = float(x)
    return repr(x) if np.isfinite(x) else str(x)


def trace_rows(traj, regularized):
    """Rows of the trace CSV; ``a`` and the ratio are blank for the Newton flow."""
    u_norm = traj.u_norm
    for i in range(len(traj)):
        if regularized:
            a = traj.a_value[i]
            ratio = traj.flow_residual_norm[i] / a
        else:
            a = ratio = None
        yield {
            "t": _num(traj.t[i]),
            "residual_norm": _num(traj.residual_norm[i]),
            "u_norm": _num(u_norm[i]),
            "a": _num(a),
            "ratio_v_over_a": _num(ratio),
            "step": _num(traj.accepted_step[i]),
        }


def write_trace_csv(path, traj, regularized):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(trace_rows(traj, regularized))


def write_rows_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if hasattr(obj, "value"):  # enums
        return obj.value
    return obj


def write_report_json(path, payload):
    """Write ``payload`` with a leading ``timestamp``; everything else is
    deterministic for identical runs."""
    doc = {"schema": REPORT_SCHEMA,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    doc.update(to_jsonable(payload))
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    return doc
