"""Byte-stable CSV and JSON emission.

Floats are written with 17 significant digits (``repr``-exact round trip),
JSON keys are sorted, every file ends with a newline and files are written
atomically through a temporary file in the target directory.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class OutputError(OSError):
    pass


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format_float(v)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    if path.is_dir():
        raise OutputError(f"output path {path} is a directory")
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise OutputError(f"output directory {parent} does not exist")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    width = len(columns)
    for row in rows:
        row = list(row)
        if len(row) != width:
            raise ValueError(f"row has {len(row)} cells, expected {width}")
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write(path, csv_text(columns, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable and explicit
        return x if math.isfinite(x) else format_float(x)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def json_text(obj) -> str:
    # json.dumps uses float.__repr__, the shortest exact round-trip form
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, json_text(obj))
