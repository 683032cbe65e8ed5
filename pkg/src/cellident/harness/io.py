"""CSV and JSON file formats of the harness."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..model.trace import VoltageTrace

TRACE_HEADER = ("time_s", "current_A", "voltage_V")


class TraceParseError(ValueError):
    def __init__(self, path, line: int, msg: str):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def _fmt(x: float) -> str:
    return repr(float(x))  # shortest string that reads back to the same double


def save_trace(trace: VoltageTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, i, v in zip(trace.time, trace.current, trace.voltage):
            w.writerow([_fmt(t), _fmt(i), _fmt(v)])


def load_trace(path) -> VoltageTrace:
    """Read a trace CSV; errors name the offending line."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceParseError(path, 1, "empty file")
    header = [h.strip() for h in rows[0]]
    missing = [h for h in TRACE_HEADER if h not in header]
    if missing:
        raise TraceParseError(path, 1, f"missing columns {missing}")
    cols = [header.index(h) for h in TRACE_HEADER]
    data = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            vals = [float(row[c]) for c in cols]
        except (ValueError, IndexError) as exc:
            raise TraceParseError(path, ln, f"bad row {row}: {exc}") from None
        if data and vals[0] <= data[-1][0]:
            raise TraceParseError(path, ln, "time is not strictly increasing")
        data.append(vals)
    if not data:
        raise TraceParseError(path, 2, "no data rows")
    a = np.array(data)
    try:
        return VoltageTrace(a[:, 0], a[:, 1], a[:, 2])
    except ValueError as exc:
        raise TraceParseError(path, 2, str(exc)) from None


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
