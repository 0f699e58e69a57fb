"""Output formatting: every float with 17 significant digits, metadata first."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return f"{x:.17g}"


def dumps(obj) -> str:
    """Compact JSON with 17-significant-digit floats (non-finite floats become null)."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "__dict__"):
        return dumps(vars(obj))
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def estimate_dict(e) -> dict:
    return {"value": e.value, "stderr": e.stderr, "n": e.n}


def write_jsonl(stream, meta: dict, records):
    stream.write(dumps({"meta": meta}) + "\n")
    for r in records:
        stream.write(dumps(r) + "\n")


def write_json(stream, meta: dict, payload: dict):
    stream.write(dumps({"meta": meta, **payload}) + "\n")


def write_csv(stream, meta: dict, header, rows):
    """CSV preceded by '# key: value' metadata lines."""
    for k, v in meta.items():
        stream.write(f"# {k}: {dumps(v)}\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    stream.write(buf.getvalue())


def read_csv(path):
    """Rows of a CSV written by :func:`write_csv`, metadata lines skipped."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
