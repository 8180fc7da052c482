"""Readers for sweep grid files (JSON or CSV) emitted by the fairshift CLI."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np


class GridError(ValueError):
    """Malformed grid file: ragged coverage, missing column, bad format."""


@dataclass(frozen=True)
class GridData:
    """A complete rectangular grid of per-cell values over two threshold axes."""

    tau_g: np.ndarray
    tau_h: np.ndarray
    columns: Mapping[str, np.ndarray]  # each (len(tau_g), len(tau_h))
    meta: Mapping

    def surface(self, column: str) -> np.ndarray:
        if column not in self.columns:
            have = ", ".join(sorted(self.columns))
            raise GridError(f"column {column!r} not found in grid (have: {have})")
        return self.columns[column]


def _assemble(rows: list[dict], meta: dict) -> GridData:
    tau_g, tau_h = [], []
    for row in rows:
        if row["tau_g"] not in tau_g:
            tau_g.append(row["tau_g"])
        if row["tau_h"] not in tau_h:
            tau_h.append(row["tau_h"])
    names = [k for k in rows[0] if k not in ("tau_g", "tau_h")]
    shape = (len(tau_g), len(tau_h))
    if len(rows) != shape[0] * shape[1]:
        raise GridError(
            f"ragged grid: {len(rows)} cells cannot fill a {shape[0]}x{shape[1]} rectangle"
        )
    gi = {v: i for i, v in enumerate(tau_g)}
    hi = {v: i for i, v in enumerate(tau_h)}
    cols = {name: np.full(shape, np.nan) for name in names}
    seen = np.zeros(shape, dtype=bool)
    for row in rows:
        i, j = gi[row["tau_g"]], hi[row["tau_h"]]
        if seen[i, j]:
            raise GridError(f"duplicate cell at tau_g={row['tau_g']!r}, tau_h={row['tau_h']!r}")
        seen[i, j] = True
        for name in names:
            v = row.get(name)
            cols[name][i, j] = np.nan if v in (None, "") else float(v)
    if not seen.all():
        i, j = np.argwhere(~seen)[0]
        raise GridError(f"ragged grid: missing cell at tau_g={tau_g[i]!r}, tau_h={tau_h[j]!r}")
    return GridData(
        tau_g=np.array(tau_g, dtype=float),
        tau_h=np.array(tau_h, dtype=float),
        columns=cols,
        meta=meta,
    )


def read_grid(path) -> GridData:
    """Parse a grid file; the format is inferred from the extension."""
    text = str(path)
    if text.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if "cells" not in payload or not payload["cells"]:
            raise GridError(f"{path}: no cells")
        return _assemble(payload["cells"], payload.get("meta", {}))
    if text.endswith(".csv"):
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = []
            for raw in csv.DictReader(fh):
                row = {"tau_g": float(raw["tau_g"]), "tau_h": float(raw["tau_h"])}
                for k, v in raw.items():
                    if k not in ("tau_g", "tau_h"):
                        row[k] = v
                rows.append(row)
        if not rows:
            raise GridError(f"{path}: no cells")
        return _assemble(rows, {})
    raise GridError(f"{path}: unknown grid format, expected .json or .csv")
