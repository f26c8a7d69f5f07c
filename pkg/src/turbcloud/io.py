"""Tabular output: header row, fixed column order, 17 significant digits.

Footer rows carry fitted quantities as ``# key=value`` lines so the table
itself stays rectangular for plotting tools.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

_DELIMS = {"csv": ",", "tsv": "\t"}


def format_value(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _cell(text: str, sep: str) -> str:
    if sep in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text


def write_table(path, columns, rows, fmt: str = "csv", footer: dict | None = None):
    """Write ``rows`` (iterable of sequences or a 2-D array) under ``columns``."""
    if fmt not in _DELIMS:
        raise ValueError(f"unknown output format {fmt!r}")
    sep = _DELIMS[fmt]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [sep.join(columns)]
    for row in rows:
        lines.append(sep.join(_cell(format_value(v), sep) for v in row))
    if footer:
        for key, value in footer.items():
            lines.append(f"# {key}={format_value(value)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table(path):
    """Read a table written by :func:`write_table`; returns (columns dict, footer dict)."""
    path = Path(path)
    text = path.read_text().splitlines()
    sep = "\t" if "\t" in text[0] else ","
    header = text[0].split(sep)
    body, footer = [], {}
    for line in text[1:]:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            try:
                footer[key] = float(value)
            except ValueError:
                footer[key] = value
        elif line.strip():
            body.append([float(v) for v in line.split(sep)])
    arr = np.array(body, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}, footer


def write_sidecar(path, record: dict):
    """Metadata written next to an output table as ``<name>.meta.json``."""
    path = Path(path)
    meta = path.with_name(path.name + ".meta.json")
    meta.write_text(json.dumps(record, indent=2, sort_keys=True, default=_json_default) + "\n")
    return meta


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
