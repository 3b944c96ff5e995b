"""CSV/metadata contract of the simulator's trajectory logs."""

from __future__ import annotations

import csv

import numpy as np
import yaml


class SchemaError(ValueError):
    """The log does not match the documented column schema."""


def load_metadata(path) -> dict:
    with open(path, "r") as fh:
        meta = yaml.safe_load(fh)
    if not isinstance(meta, dict) or "scenario" not in meta:
        raise SchemaError(f"metadata file {path} lacks a 'scenario' section")
    return meta


def option_counts(meta) -> list:
    agents = meta["scenario"].get("agents", [])
    if not agents:
        raise SchemaError("metadata lists no agents")
    return [len(a["options"]) for a in agents]


def required_columns(meta) -> list:
    """Columns the renderer consumes, derived from the scenario metadata."""
    counts = option_counts(meta)
    cols = ["t", "time"]
    for i in range(len(counts)):
        a = i + 1
        cols += [f"x{a}_px", f"x{a}_py", f"x{a}_phi", f"x{a}_v"]
    for i, n_opt in enumerate(counts):
        a = i + 1
        cols += [f"z{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"sigma{a}_{k + 1}" for k in range(n_opt)]
        cols += [f"lambda{a}", f"poi{a}"]
    return cols


def load_log(csv_path, meta) -> dict:
    """Read the trajectory CSV into column arrays, validating the schema."""
    with open(csv_path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path} is empty")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{csv_path} has a header but no rows")
    missing = [c for c in required_columns(meta) if c not in header]
    if missing:
        raise SchemaError(
            f"{csv_path} is missing required columns: {', '.join(missing)}")
    data = np.array(rows, dtype=float)
    return {name: data[:, k] for k, name in enumerate(header)}
