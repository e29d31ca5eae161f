"""
CSV schema contract shared with the simulation tool.

This package reads only delimited outputs (never snapshot binaries); the
schema line

    # axieuler-csv schema=<name> version=<int>

is the complete interface.  The declarations here are an independent copy
of the documented contract, versioned so producer/consumer drift is
rejected instead of silently misread.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

CSV_VERSION = 1

SCHEMAS = {
    "growth_beta": ["t", "beta", "beta_running", "argmax_r", "argmax_z",
                    "n_reflected"],
    "growth_lambda": ["t", "lambda"],
    "criterion_ledger": ["t", "bkm_integrand", "gen_integrand_r",
                         "gen_integrand_z", "running_integral", "verdict"],
    "scaling": ["t", "lambda_p", "Lambda_p", "profile_inf_norm", "threshold",
                "verdict"],
}


class SchemaError(Exception):
    """Missing, mismatched, or wrong-version CSV schema."""


def read_table(path, expect_schema: str):
    """Validate the schema line and return (columns, float matrix).

    Non-numeric cells (verdict strings) become NaN columns.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    lines = [ln for ln in path.read_text().split("\n") if ln]
    if not lines or not lines[0].startswith("# axieuler-csv"):
        raise SchemaError(
            f"{path}: missing schema line "
            f"(expected '# axieuler-csv schema=... version={CSV_VERSION}')")
    try:
        fields = dict(part.split("=") for part in lines[0].split()[2:])
    except ValueError as e:
        raise SchemaError(f"{path}: malformed schema line") from e
    schema = fields.get("schema")
    version = int(fields.get("version", "-1"))
    if schema != expect_schema:
        raise SchemaError(
            f"{path}: schema {schema!r}, expected {expect_schema!r}")
    if version != CSV_VERSION:
        raise SchemaError(
            f"{path}: schema version {version}, this tool reads version "
            f"{CSV_VERSION}")
    if len(lines) < 2:
        raise SchemaError(f"{path}: missing header row")
    cols = lines[1].split(",")
    if cols != SCHEMAS[expect_schema]:
        raise SchemaError(
            f"{path}: columns {cols} do not match schema "
            f"{expect_schema!r} (version hint: regenerate with a matching "
            f"producer, expected {SCHEMAS[expect_schema]})")
    if len(lines) < 3:
        raise SchemaError(f"{path}: no data rows")

    def conv(cell):
        try:
            return float(cell)
        except ValueError:
            return np.nan

    data = np.array([[conv(c) for c in ln.split(",")] for ln in lines[2:]])
    if data.shape[1] != len(cols):
        raise SchemaError(f"{path}: ragged rows")
    return cols, data
