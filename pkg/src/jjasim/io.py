"""Deterministic CSV and JSON writers shared by the command line tools."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from . import __version__


def format_value(v) -> str:
    """Shortest round-trip text for floats; NaN as empty."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) or hasattr(v, "dtype"):
        f = float(v)
        if math.isnan(f):
            return ""
        return repr(f)
    return str(v)


def csv_text(header, rows, comment: dict | None = None) -> str:
    """CSV with an optional leading ``# {json}`` metadata line."""
    buf = io.StringIO()
    if comment is not None:
        buf.write("# " + json.dumps(comment, sort_keys=True, default=_json_default) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_outputs(out_dir, stem: str, header, rows, metadata: dict, comment: dict | None = None):
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``out_dir``; return both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(csv_text(header, rows, comment))
    meta = dict(metadata)
    meta.setdefault("artifact_version", __version__)
    json_path.write_text(json_text(meta))
    return csv_path, json_path
