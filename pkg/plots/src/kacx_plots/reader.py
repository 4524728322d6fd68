"""Readers for the documented kacx CSV schemas.

The plots package consumes the primary toolkit only through its files, so the
small amount of parsing lives here rather than importing the library.
"""

from __future__ import annotations

import numpy as np


def read_csv(path, n_cols):
    """Header metadata plus the numeric columns of a kacx CSV."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if body.startswith("schema:"):
                    meta["schema"] = body.split(":", 1)[1].strip()
                elif "=" in body:
                    key, val = body.split("=", 1)
                    meta[key.strip()] = val.strip()
                continue
            parts = s.split(",")
            try:
                rows.append([float(v) for v in parts[:n_cols]])
            except ValueError:
                continue  # column-name line
    return meta, np.asarray(rows, dtype=float)


def expect_schema(meta, kind, path):
    tag = meta.get("schema", "")
    if not tag.endswith(f"/{kind}/v1") and f"/{kind}/" not in tag:
        raise ValueError(f"{path}: expected a {kind} file, found schema "
                         f"{tag or 'none'!r}")
