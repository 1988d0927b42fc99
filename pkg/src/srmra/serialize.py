"""Persistence helpers shared by the CLI subcommands.

Two families of formats:

* Signal/batch interchange.  CSV holds one vector per line in plain
  positional decimals (no scientific notation).  The JSON container is
  ``{"params": ..., "values": [...]}`` for a signal and
  ``{"params": ..., "rows": [[...]], "seed": ..., "true_shifts": [...]}``
  for a batch; a loader distinguishes the two by which key is present.

* Versioned experiment tables.  Line 1 is ``# schema: srmra/<kind>/v1``,
  line 2 the column names, then one comma-separated record per row.
  Floats are written as shortest round-trip positional decimals, booleans
  as ``true``/``false``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .invariants import InvariantTriple
from .signal import HighResSignal, ModelParams, ObservationBatch, PriorSpec

__all__ = [
    "SCHEMAS",
    "format_float",
    "parse_float",
    "signal_to_csv",
    "vectors_from_csv",
    "batch_to_csv",
    "signal_to_json",
    "signal_from_json",
    "batch_to_json",
    "batch_from_json",
    "load_container",
    "prior_to_json",
    "prior_from_json",
    "triple_to_json",
    "triple_from_json",
    "em_result_to_json",
    "write_json",
    "read_json",
    "schema_line",
    "write_table",
    "read_table",
]

SCHEMA_PREFIX = "# schema: srmra/"
SCHEMA_VERSION = "v1"

# Column contract for every emitted table kind.  The plotting component
# consumes these by name, so order and spelling are load-bearing.
SCHEMAS = {
    "results": (
        "experiment_id", "trial", "snr", "M", "L", "N",
        "relative_error", "iterations", "converged", "wall_time_seconds",
    ),
    "per_frequency": ("freq_index", "estimate_error", "baseline_error"),
    "overlay": ("position", "truth", "baseline", "estimate"),
    "snr_curve": ("snr", "median_relative_error", "n_trials"),
    "error_vs_L": ("M", "L", "mean_relative_error", "n_trials"),
    "identifiability": ("L", "K", "P_of_L", "rank", "identifiable"),
}


def format_float(v) -> str:
    """Shortest positional decimal that round-trips; nan/inf spelled out."""
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return np.format_float_positional(v, unique=True, trim="0")


def parse_float(s: str) -> float:
    return float(s)


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


# ---------------------------------------------------------------------------
# signal / batch CSV


def signal_to_csv(signal, path) -> None:
    values = signal.values if isinstance(signal, HighResSignal) else np.asarray(signal, dtype=float)
    with open(path, "w") as fh:
        fh.write(",".join(format_float(v) for v in values) + "\n")


def batch_to_csv(batch, path) -> None:
    rows = batch.samples if isinstance(batch, ObservationBatch) else np.asarray(batch, dtype=float)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def vectors_from_csv(path) -> np.ndarray:
    """Read a one-vector-per-line CSV back as a 2-D float array."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([parse_float(tok) for tok in line.split(",")])
    if not rows:
        raise ConfigError(f"{path}: empty CSV")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"{path}: ragged rows")
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------------------
# JSON containers


def signal_to_json(signal: HighResSignal) -> dict:
    return {
        "params": {"M": signal.M, "bandlimit": signal.bandlimit},
        "values": [float(v) for v in signal.values],
    }


def signal_from_json(d: dict) -> HighResSignal:
    params = d.get("params") or {}
    return HighResSignal(
        values=np.array(d["values"], dtype=float),
        bandlimit=params.get("bandlimit"),
    )


def batch_to_json(batch: ObservationBatch) -> dict:
    p = batch.params
    out = {
        "params": {"M": p.M, "L": p.L, "sigma": p.sigma, "N": p.N, "seed": p.seed},
        "rows": [[float(v) for v in row] for row in batch.samples],
        "seed": p.seed,
        "true_shifts": None,
    }
    if batch.true_shifts is not None:
        out["true_shifts"] = [int(s) for s in batch.true_shifts]
    return out


def batch_from_json(d: dict) -> ObservationBatch:
    p = d["params"]
    params = ModelParams(M=int(p["M"]), L=int(p["L"]), sigma=float(p["sigma"]),
                         N=int(p["N"]), seed=int(p["seed"]))
    shifts = d.get("true_shifts")
    return ObservationBatch(
        samples=np.array(d["rows"], dtype=float),
        params=params,
        true_shifts=None if shifts is None else np.array(shifts, dtype=int),
    )


def load_container(path):
    """Load a signal or batch JSON container, telling them apart by key."""
    d = read_json(path)
    if "rows" in d:
        return batch_from_json(d)
    if "values" in d:
        return signal_from_json(d)
    raise ConfigError(f"{path}: neither a signal nor a batch container")


def prior_to_json(prior: PriorSpec) -> dict:
    if prior.form == "circulant":
        return {"form": "circulant",
                "power_profile": [float(v) for v in prior.power_profile]}
    return {"form": "dense",
            "precision": [[float(v) for v in row] for row in prior.precision]}


def prior_from_json(d: dict) -> PriorSpec:
    form = d.get("form")
    if form == "circulant":
        return PriorSpec.circulant(np.array(d["power_profile"], dtype=float))
    if form == "dense":
        return PriorSpec.dense(np.array(d["precision"], dtype=float))
    raise ConfigError(f"unknown prior form: {form!r}")


def triple_to_json(triple: InvariantTriple) -> dict:
    return {
        "mean": float(triple.mean),
        "power_spectrum": [float(v) for v in triple.power_spectrum],
        "bispectrum_real": [[float(v) for v in row] for row in triple.bispectrum.real],
        "bispectrum_imag": [[float(v) for v in row] for row in triple.bispectrum.imag],
    }


def triple_from_json(d: dict) -> InvariantTriple:
    bis = np.array(d["bispectrum_real"], dtype=float) + 1j * np.array(d["bispectrum_imag"], dtype=float)
    return InvariantTriple(
        mean=float(d["mean"]),
        power_spectrum=np.array(d["power_spectrum"], dtype=float),
        bispectrum=bis,
    )


def em_result_to_json(result) -> dict:
    return {
        "estimate": [float(v) for v in result.estimate.values],
        "bandlimit": result.estimate.bandlimit,
        "log_posterior_trace": [float(v) for v in result.log_posterior_trace],
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "restart_index": int(result.restart_index),
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# versioned tables


def schema_line(kind: str) -> str:
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown table kind: {kind!r}")
    return f"{SCHEMA_PREFIX}{kind}/{SCHEMA_VERSION}"


def write_table(path, kind: str, rows) -> None:
    """Write one table: schema header, column names, then the records.

    Each row may be a sequence (schema order) or a mapping keyed by the
    schema's column names.
    """
    columns = SCHEMAS[kind] if kind in SCHEMAS else None
    header = schema_line(kind)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if isinstance(row, dict):
                cells = [row[c] for c in columns]
            else:
                cells = list(row)
                if len(cells) != len(columns):
                    raise ConfigError(f"{kind} row has {len(cells)} cells, want {len(columns)}")
            fh.write(",".join(_format_cell(c) for c in cells) + "\n")


def read_table(path):
    """Parse a versioned table; returns (kind, columns, rows-of-strings)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(SCHEMA_PREFIX):
        raise ConfigError(f"{path}: missing schema header line")
    tag = lines[0][len(SCHEMA_PREFIX):]
    if not tag.endswith("/" + SCHEMA_VERSION):
        raise ConfigError(f"{path}: unsupported schema version in {lines[0]!r}")
    kind = tag[: -len("/" + SCHEMA_VERSION)]
    if kind not in SCHEMAS:
        raise ConfigError(f"{path}: unknown table kind {kind!r}")
    if len(lines) < 2:
        raise ConfigError(f"{path}: missing column header")
    columns = tuple(lines[1].split(","))
    if columns != SCHEMAS[kind]:
        raise ConfigError(f"{path}: columns {columns} do not match {SCHEMAS[kind]}")
    rows = []
    for ln, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ConfigError(f"{path}:{ln}: expected {len(columns)} cells, got {len(cells)}")
        rows.append(cells)
    return kind, columns, rows
