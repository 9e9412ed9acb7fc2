"""Deterministic JSON/CSV output with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

OUTPUT_DIR_ENV = "SMMS_OUTPUT_DIR"


def plain(value):
    """Convert numpy scalars/arrays, tuples and non-finite floats to JSON-safe values.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return _Float17(x)
    return value


class _Float17(float):
    """Float serialized with exactly 17 significant digits."""

    def __repr__(self):
        return format(float(self), ".17g")


def _encode(o, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(o, dict):
        if not o:
            yield "{}"
            return
        yield "{"
        for i, (k, v) in enumerate(o.items()):
            yield (sep if i else "") + pad + json.dumps(k) + ": "
            yield from _encode(v, indent, level + 1)
        yield end + "}"
    elif isinstance(o, list):
        if not o:
            yield "[]"
            return
        yield "["
        for i, v in enumerate(o):
            yield (sep if i else "") + pad
            yield from _encode(v, indent, level + 1)
        yield end + "]"
    elif isinstance(o, _Float17):
        yield repr(o)
    else:
        yield json.dumps(o)


def dumps(obj, indent: int | None = 2) -> str:
    """Stable-order JSON text (insertion order preserved) with 17-digit floats."""
    return "".join(_encode(plain(obj), indent, 0)) + "\n"


def format_number(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_text(columns: dict) -> str:
    """Comma-separated table with a header row; columns must share a length."""
    names = list(columns)
    arrays = [np.atleast_1d(np.asarray(columns[k], dtype=float)) for k in names]
    lengths = {a.size for a in arrays}
    if len(lengths) > 1:
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*arrays):
        writer.writerow([format_number(x) for x in row])
    return buf.getvalue()


def atomic_write(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def output_dir(default=".") -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or default)
