"""Strict CSV loading for the documented artifact schemas."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    pass


def load_csv(path, required: tuple) -> dict:
    """Read an artifact CSV into named float/str columns.

    The first line may be the '# manifest: ...' reference; the header must
    contain every required column or the load fails loudly.
    """
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input CSV not found: {p}")
    with open(p) as f:
        rows = [r for r in csv.reader(f)
                if r and not r[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{p} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"{p} is missing columns {missing}; "
                          f"found {header}")
    body = rows[1:]
    if not body:
        raise SchemaError(f"{p} has a header but no data rows")
    cols: dict = {}
    for j, name in enumerate(header):
        raw = [r[j] if j < len(r) else "" for r in body]
        try:
            cols[name] = np.array([float(v) if v != "" else np.nan
                                   for v in raw])
        except ValueError:
            cols[name] = np.array(raw, dtype=object)
    return cols
