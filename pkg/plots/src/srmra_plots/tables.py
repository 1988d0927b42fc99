"""Reader for the experiment CSV tables.

The file contract is re-implemented here from the documented format rather
than imported, so this package stays usable against CSVs produced by any
conforming writer.  Layout:

    # schema: srmra/<kind>/v1
    col_a,col_b,...
    1.0,2.5,...

All diagnostics carry ``path:line`` so a bad file can be opened at the
offending row directly.
"""

from __future__ import annotations

import csv
import io

import numpy as np

SCHEMA_PREFIX = "# schema: srmra/"
SCHEMA_VERSION = "v1"

# column layout per table kind, as published by the generating package
TABLE_COLUMNS = {
    "results": (
        "experiment_id",
        "trial",
        "m",
        "l",
        "bandlimit",
        "snr",
        "n",
        "seed",
        "relative_error",
        "iterations",
        "converged",
        "wall_time_seconds",
    ),
    "per_frequency": ("freq_index", "estimate_error", "baseline_error"),
    "overlay": ("position", "truth", "baseline", "estimate"),
    "snr_curve": ("snr", "median_relative_error", "n_trials"),
    "error_vs_L": ("M", "L", "mean_relative_error", "n_trials"),
    "identifiability": ("L", "K", "group_order", "bound_fraction", "jacobian_rank"),
}

# columns that are not plain numbers; everything else parses as float
_NON_NUMERIC = {"experiment_id", "converged"}


class SchemaError(Exception):
    """Input file does not match the documented table contract."""


def _header_kind(path: str, line: str) -> str:
    if not line.startswith(SCHEMA_PREFIX):
        raise SchemaError(
            f"{path}:1: missing schema header, expected "
            f"'{SCHEMA_PREFIX}<kind>/{SCHEMA_VERSION}'"
        )
    tail = line[len(SCHEMA_PREFIX):].strip()
    kind, _, version = tail.partition("/")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}:1: unsupported schema version {version!r}, "
            f"this reader understands {SCHEMA_VERSION!r}"
        )
    if kind not in TABLE_COLUMNS:
        raise SchemaError(f"{path}:1: unknown table kind {kind!r}")
    return kind


def _check_columns(path: str, kind: str, got: list[str]) -> None:
    want = TABLE_COLUMNS[kind]
    if len(got) != len(want):
        raise SchemaError(
            f"{path}:2: {kind} table wants {len(want)} columns "
            f"{list(want)}, file has {len(got)}"
        )
    for i, (g, w) in enumerate(zip(got, want)):
        if g != w:
            raise SchemaError(
                f"{path}:2: column {i + 1} is {g!r}, want {w!r}"
            )


def read_table(path: str, expected_kind: str | None = None) -> dict[str, np.ndarray]:
    """Load one CSV table into per-column float arrays.

    ``expected_kind`` pins the table kind a caller can consume; a
    mismatch is a SchemaError, not a silent misread.  Non-numeric
    columns come back as object arrays of stripped strings.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read input: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise SchemaError(f"{path}:1: empty file, no schema header")
    kind = _header_kind(path, lines[0])
    if expected_kind is not None and kind != expected_kind:
        raise SchemaError(
            f"{path}:1: table kind is {kind!r}, this figure needs {expected_kind!r}"
        )
    if len(lines) < 2 or not lines[1].strip():
        raise SchemaError(f"{path}:2: missing column header line")

    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    header = [c.strip() for c in next(reader)]
    _check_columns(path, kind, header)

    columns: dict[str, list] = {name: [] for name in header}
    n_cols = len(header)
    for offset, row in enumerate(reader, start=3):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != n_cols:
            raise SchemaError(
                f"{path}:{offset}: expected {n_cols} cells, got {len(row)}"
            )
        for name, cell in zip(header, row):
            cell = cell.strip()
            if name in _NON_NUMERIC:
                columns[name].append(cell)
                continue
            try:
                columns[name].append(float(cell))
            except ValueError as exc:
                raise SchemaError(
                    f"{path}:{offset}: column {name!r}: "
                    f"cannot parse {cell!r} as a number"
                ) from exc

    n_rows = len(columns[header[0]])
    if n_rows == 0:
        raise SchemaError(f"{path}: no data rows")

    out: dict[str, np.ndarray] = {}
    for name, values in columns.items():
        if name in _NON_NUMERIC:
            out[name] = np.array(values, dtype=object)
        else:
            out[name] = np.asarray(values, dtype=float)
    return out
