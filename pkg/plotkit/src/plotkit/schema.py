"""Expected layout of the sweep harness's aggregate CSV.

The column names below are the interface contract with the simulator's
output; plotkit validates inputs against them and reports the first
offending column by name.
"""

from __future__ import annotations

import pandas as pd

AXIS_COLUMNS = ["m", "n", "bundle_limit", "lambda_per_min"]

MEAN_COLUMNS = [
    "throughput_bps_mean", "mean_latency_ms_mean", "p95_latency_ms_mean",
    "outage_fraction_mean", "per_aggregator_throughput_bps_mean",
]

CI_COLUMNS = [c.replace("_mean", "_ci95") for c in MEAN_COLUMNS]

INCIDENT_COLUMNS = [
    "tx_error_mean", "pdcch_starvation_mean",
    "pusch_starvation_mean", "pdsch_starvation_mean",
]


class SchemaError(ValueError):
    """Input does not match the CSV contract; `field` names the offender."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def load_aggregate(path, required_columns) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise SchemaError("input_csv", f"no such file: {path}") from None
    except pd.errors.EmptyDataError:
        raise SchemaError("input_csv", f"empty CSV: {path}") from None
    for column in required_columns:
        if column not in frame.columns:
            raise SchemaError(column, "required column missing from CSV")
    if len(frame) == 0:
        raise SchemaError("input_csv", "CSV has a header but no rows")
    return frame


def ci_column_for(mean_column: str) -> str | None:
    if mean_column.endswith("_mean"):
        return mean_column.replace("_mean", "_ci95")
    return None
