"""JSON reports and CSV tables written to the output directory."""
# Standard Library
from __future__ import annotations

from collections.abc import Mapping
from collections.abc import Sequence
import csv
from enum import Enum
import json
import logging
from pathlib import Path
from typing import Any

# External Party
import numpy as np

LOG_NAME = "kink_stability.reporting"
LOG = logging.getLogger(LOG_NAME)

SCHEMA_VERSION = 1
CSV_FORMAT = "%.17g"


def _to_builtin(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def render_json(payload: Mapping[str, Any]) -> str:
    """Return the report text with the schema version and sorted keys."""
    document = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(document, default=_to_builtin, sort_keys=True, indent=2) + "\n"


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    """Write a JSON report, creating the directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(payload))
    LOG.debug("wrote %s", path)
    return path


def write_columns(
    path: Path,
    columns: Mapping[str, Sequence[float] | np.ndarray],
    units: Mapping[str, str],
) -> Path:
    """Write equal-length columns with a units comment line and a header row."""
    names = list(columns)
    table = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    unit_line = ", ".join(f"{name}={units.get(name, '1')}" for name in names)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        table,
        delimiter=",",
        fmt=CSV_FORMAT,
        header=f"# units: {unit_line}\n{','.join(names)}",
        comments="",
    )
    LOG.debug("wrote %s with %d rows", path, table.shape[0])
    return path


def write_table(path: Path, rows: Sequence[Mapping[str, Any]]) -> Path:
    """Write a table of heterogeneous rows; the header is the union of the keys."""
    names: list[str] = []
    for row in rows:
        names.extend(key for key in row if key not in names)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=names, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    key: repr(float(value)) if isinstance(value, float) else value
                    for key, value in row.items()
                }
            )
    LOG.debug("wrote %s with %d rows", path, len(rows))
    return path
