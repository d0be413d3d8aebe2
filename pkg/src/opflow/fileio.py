"""Plain-text and binary serialization used by the library and CLI.

Operator text format: one matrix row per line, complex entries written as
``re+imj`` (e.g. ``1.5+0.5j``, ``-2.0-0.0j``) separated by single spaces —
exactly what Python's ``complex()`` parses.  Binary format: a standard
``.npy`` container (selected by file suffix).

CSV files carry a leading commented metadata block (``# key = value`` lines)
followed by a header row and data rows; floats are written with ``repr`` so
that equal runs produce byte-identical files and values round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "format_float",
    "format_complex",
    "write_operator",
    "read_operator",
    "write_csv",
    "read_csv",
    "write_json_record",
]


def format_float(x) -> str:
    """Shortest round-tripping decimal representation."""
    return repr(float(x))


def format_complex(z) -> str:
    z = complex(z)
    sign = "+" if z.imag >= 0 or np.isnan(z.imag) else "-"
    return f"{format_float(z.real)}{sign}{format_float(abs(z.imag))}j"


def write_operator(path, a) -> None:
    """Write an operator as ``.npy`` (binary) or text, by suffix."""
    path = Path(path)
    a = np.asarray(a, dtype=complex)
    if path.suffix == ".npy":
        np.save(path, a)
        return
    lines = [" ".join(format_complex(z) for z in row) for row in a]
    path.write_text("\n".join(lines) + "\n")


def read_operator(path) -> np.ndarray:
    """Read an operator written by :func:`write_operator`."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.asarray(np.load(path), dtype=complex)
    rows = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([complex(tok) for tok in line.split()])
    if not rows:
        raise ValueError(f"no matrix rows found in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged rows in {path}")
    return np.array(rows, dtype=complex)


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_csv(path, columns: dict, meta: dict | None = None) -> None:
    """Write named columns with a commented metadata block."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    length = len(arrays[0])
    if any(len(a) != length for a in arrays):
        raise ValueError("columns have unequal lengths")
    out = []
    for key, value in (meta or {}).items():
        out.append(f"# {key} = {value}")
    out.append(",".join(names))
    for i in range(length):
        out.append(",".join(_format_cell(a[i]) for a in arrays))
    path.write_text("\n".join(out) + "\n")


def read_csv(path):
    """Read back a CSV written by :func:`write_csv`.

    Returns ``(meta, columns)`` with metadata values as strings and columns
    as float arrays.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = [tok.strip() for tok in line.split(",")]
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if header is None:
        raise ValueError(f"no header row in {path}")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    return meta, {name: data[:, j] for j, name in enumerate(header)}


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def write_json_record(path, record: dict) -> None:
    """Deterministic flat JSON record (sorted keys, repr-exact floats)."""
    Path(path).write_text(
        json.dumps(record, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
