"""Plain-text report output: CSV tables and ``key = value`` summaries.

Files are written to a temporary sibling and renamed into place, so a reader
never sees a half-written report.
"""

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(value):
    """Stable text form: repr for floats (round-trips), JSON for containers."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, default=_plain)
    return str(value)


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return repr(obj)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) for c in row])
    return buf.getvalue()


def summary_text(items):
    """One ``key = value`` line per entry, in the given order."""
    if isinstance(items, dict):
        items = items.items()
    return "".join(f"{k} = {fmt(v)}\n" for k, v in items)


def write_csv(path, header, rows):
    return atomic_write(path, csv_text(header, rows))


def write_summary(path, items):
    return atomic_write(path, summary_text(items))
