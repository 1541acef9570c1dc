"""Byte-stable JSON and CSV emission."""

import csv
from fractions import Fraction
import io
import json
import math
import os

import numpy as np

from .errors import ConfigError

LEVEL_COLUMNS = ("eps", "J", "radius", "M", "I", "II", "modulus", "bound_L1", "T_eps")


def _num(x):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def plain(obj):
    """Convert numpy scalars, arrays, Fractions and tuples to JSON-ready values.
    Non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else _num(x)
    return obj


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _num(obj)
    return json.dumps(obj, ensure_ascii=False)


def canonical_json(obj, indent=2):
    """Sorted keys, floats at 17 significant digits, non-finite as strings."""
    return _encode(plain(obj), indent, 0) + "\n"


def csv_text(columns, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow(["" if v is None else _num(float(v)) if isinstance(v, (float, np.floating)) else v
                     for v in plain(list(r))])
    return buf.getvalue()


def level_csv(report):
    rows = report.level_rows() if report is not None else []
    return csv_text(LEVEL_COLUMNS, rows)


def write_text(path, text):
    try:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def emit_report(report, fmt, path):
    """Write ``report`` (an object with ``as_dict``/``level_rows`` or a dict) as
    json or csv."""
    if fmt == "json":
        body = report.as_dict() if hasattr(report, "as_dict") else report
        write_text(path, canonical_json(body))
    elif fmt == "csv":
        write_text(path, level_csv(report))
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
