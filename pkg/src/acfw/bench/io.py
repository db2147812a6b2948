"""Trace serialization: CSV per run and a JSON bundle for external plotting."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

from ..core import CSV_FIELDS, IterRecord, Trace

TIME_FIELDS = ("elapsed_s",)
_BOOL_FIELDS = ("accepted", "in_I_eta", "in_G")
_INT_FIELDS = ("t", "n_f", "n_g", "n_lmo")


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    # repr round-trips exactly and spells infinity as inf
    return repr(float(value))


def format_csv(trace, exclude=()):
    cols = [c for c in CSV_FIELDS if c not in exclude]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for rec in trace.records:
        buf.write(",".join(_fmt(getattr(rec, c)) for c in cols) + "\n")
    return buf.getvalue()


def atomic_write(path, text):
    """Write via a temporary file in the same directory and ``os.replace``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(trace, path):
    if not trace.records:
        raise ValueError("cannot emit an empty trace")
    atomic_write(path, format_csv(trace))


def parse_csv_text(text, **meta):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    records = []
    for row in reader:
        kw = {}
        for name in CSV_FIELDS:
            val = row[name]
            if name in _BOOL_FIELDS:
                kw[name] = val == "1"
            elif name in _INT_FIELDS:
                kw[name] = int(val)
            else:
                kw[name] = float(val)
        records.append(IterRecord(**kw))
    trace = Trace(records=records, status="loaded", **meta)
    if records and math.isnan(trace.L0):
        trace.L0 = records[0].L_t
    return trace


def read_csv(path, **meta):
    """Load a CSV trace; ``meta`` sets ``Trace`` fields the CSV does not carry."""
    with open(path, newline="") as fh:
        return parse_csv_text(fh.read(), **meta)


def plot_series(trace):
    return {
        "t": trace.column("t").tolist(),
        "elapsed_s": trace.column("elapsed_s").tolist(),
        "gap": trace.column("gap").tolist(),
        "f": trace.column("f").tolist(),
        "n_f": trace.column("n_f").tolist(),
    }


def emit_plot_data(traces, path):
    """Group traces by method label (``AC-CFW``, ``B-PFW``, ...) into one JSON file."""
    out = {}
    for trace in traces:
        out.setdefault(trace.label, []).append(plot_series(trace))
    atomic_write(path, json.dumps(out, allow_nan=True) + "\n")
