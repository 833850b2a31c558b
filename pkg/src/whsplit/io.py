"""File formats.

Signals are CSV files with an ``index,value`` header and a JSON sidecar
holding the sample rate. Structured objects are JSON. Tables are written
with pyarrow, whose float formatting is the shortest representation that
parses back to the same double.
"""

import json
from pathlib import Path

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv
import pyarrow.parquet as pq

from whsplit.errors import ConfigurationError, DegenerateError
from whsplit.lti import Signal


def write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Unable to read JSON from {path}: {e}") from e


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def write_signal(path, sig: Signal):
    table = pa.table(
        {
            "index": pa.array(np.arange(len(sig)), pa.int64()),
            "value": pa.array(sig.samples, pa.float64()),
        }
    )
    pacsv.write_csv(table, str(path))
    write_json(sidecar_path(path), {"sample_rate": sig.sample_rate})


def read_signal(path) -> Signal:
    try:
        table = pacsv.read_csv(str(path))
    except (OSError, pa.ArrowInvalid) as e:
        raise ConfigurationError(f"Unable to read signal from {path}: {e}") from e

    if table.column_names != ["index", "value"]:
        raise ConfigurationError(
            f"{path} must have the header 'index,value', got {table.column_names}"
        )

    index = table.column("index").to_numpy()

    if not np.array_equal(index, np.arange(len(index))):
        raise ConfigurationError(f"{path} index column must count from 0")

    sidecar = sidecar_path(path)
    sample_rate = read_json(sidecar)["sample_rate"] if sidecar.exists() else 1.0

    try:
        values = table.column("value").to_numpy().astype(np.float64)
        return Signal(values, sample_rate)
    except DegenerateError as e:
        raise ConfigurationError(f"Invalid signal in {path}: {e}") from e


def write_table(path, columns):
    pacsv.write_csv(pa.table(columns), str(path))


def write_frf(path, frf):
    write_table(
        path,
        {
            "freq": frf.frequencies_hz,
            "real": frf.response.real,
            "imag": frf.response.imag,
            "variance": frf.sample_variance,
        },
    )


def write_scan(path, scan):
    write_table(
        path,
        {
            "bits": [str(a) for a, _ in scan.ranked],
            "mse": scan.costs,
        },
    )


def write_ga_history(path, result):
    write_table(
        path,
        {
            "generation": np.arange(len(result.history)),
            "best_cost": np.asarray(result.history),
        },
    )


def write_report(out_dir, report, markdown=False):
    """Write ``report.csv``, ``report.json``, ``trials.parquet`` and
    optionally ``report.md`` into ``out_dir``"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pacsv.write_csv(report.row_table(), str(out_dir / "report.csv"))
    write_json(out_dir / "report.json", report.to_dict())
    pq.write_table(report.trial_table(), str(out_dir / "trials.parquet"))
    paths = [out_dir / "report.csv", out_dir / "report.json", out_dir / "trials.parquet"]

    if markdown:
        (out_dir / "report.md").write_text(report.to_markdown())
        paths.append(out_dir / "report.md")

    return paths
