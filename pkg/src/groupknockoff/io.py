"""File ingestion and result serialization for the command-line tools.

CSV parsing is locale-independent (C-locale float syntax only) and reports
parse failures with 1-based row/column locations.  Results are wrapped in a
versioned envelope that echoes the full invocation, so every run can be
reproduced from its output plus the input files.  Floats serialize via
``repr`` and therefore round-trip bit-exactly through JSON.
"""

from __future__ import annotations

import csv
import json
import time
from typing import Sequence

import numpy as np

from .errors import DataValidationError

__all__ = [
    "SCHEMA_VERSION",
    "read_matrix_csv",
    "read_groups_file",
    "write_matrix_csv",
    "build_envelope",
    "write_json",
    "write_records_csv",
]

SCHEMA_VERSION = 1

MISSING_TOKENS = ("", "NA")


def _parse_cell(text: str, row: int, col: int, missing_ok: bool) -> float:
    token = text.strip()
    if token in MISSING_TOKENS:
        if missing_ok:
            return float("nan")
        raise DataValidationError(
            f"missing value at row {row}, column {col} (1-based)"
        )
    try:
        return float(token)
    except ValueError:
        raise DataValidationError(
            f"non-numeric cell {token!r} at row {row}, column {col} (1-based)"
        ) from None


def _is_header_row(cells: Sequence[str], missing_ok: bool) -> bool:
    # A row is a header when any cell is neither a number nor a missing token.
    for cell in cells:
        token = cell.strip()
        if missing_ok and token in MISSING_TOKENS:
            continue
        try:
            float(token)
        except ValueError:
            return True
    return False


def read_matrix_csv(path, expect_header: bool | None = None,
                    missing_ok: bool = False) -> tuple[np.ndarray, list[str] | None]:
    """Read a numeric CSV into an (n, p) float matrix.

    ``expect_header``: True/False force the first row's role; None
    auto-detects (a first row with any non-numeric cell is a header).
    With ``missing_ok`` empty cells and the token NA become NaN; otherwise
    they are errors.  Returns (matrix, column names or None).
    """
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataValidationError(f"{path}: file is empty")
    names: list[str] | None = None
    start = 0
    header = _is_header_row(rows[0], missing_ok) if expect_header is None else expect_header
    if header:
        names = [c.strip() for c in rows[0]]
        start = 1
    if start >= len(rows):
        raise DataValidationError(f"{path}: no data rows below the header")
    width = len(rows[start])
    data = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:], start=start):
        if len(row) != width:
            raise DataValidationError(
                f"{path}: ragged row {i + 1} (1-based) has {len(row)} cells, expected {width}"
            )
        for j, cell in enumerate(row):
            data[i - start, j] = _parse_cell(cell, i + 1, j + 1, missing_ok)
    if names is not None and len(names) != width:
        raise DataValidationError(f"{path}: header width does not match data rows")
    return data, names


def read_groups_file(path) -> list[str]:
    """One group label per line; blank lines are ignored."""
    try:
        with open(path) as fh:
            labels = [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from exc
    if not labels:
        raise DataValidationError(f"{path}: no group labels found")
    return labels


def write_matrix_csv(path, M: np.ndarray, names: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if names is not None:
            writer.writerow(names)
        for row in np.asarray(M):
            writer.writerow([repr(float(v)) for v in row])


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if v != v else v  # NaN has no JSON literal
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def build_envelope(subcommand: str, invocation: dict, payload: dict,
                   started: float) -> dict:
    """Versioned result wrapper: schema, invocation echo, timing, payload."""
    return {
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "invocation": _jsonable(invocation),
        "timing_seconds": time.perf_counter() - started,
        "payload": _jsonable(payload),
    }


def write_json(obj: dict, path=None) -> str:
    """Serialize to pretty JSON; write to ``path`` or return the text."""
    text = json.dumps(obj, indent=2, sort_keys=False, allow_nan=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def write_records_csv(records: list[dict], path) -> None:
    """Long-format trial records; the header is the union of record keys."""
    if not records:
        with open(path, "w", newline="") as fh:
            fh.write("")
        return
    fields: list[str] = []
    for rec in records:
        for key in rec:
            if key not in fields:
                fields.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for rec in records:
            out = {}
            for key in fields:
                val = rec.get(key, "")
                if isinstance(val, float) and val != val:
                    val = ""
                elif val is None:
                    val = ""
                out[key] = val
            writer.writerow(out)
