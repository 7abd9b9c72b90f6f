"""Reading and writing traffic matrices, event manifests and run records."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, TypeAdapter, ValidationError

from errors import ConfigError, DataError, MatrixParseError
from traffic_models import AnomalyEvent, RunConfig

FLOAT_FORMAT = "%.17g"

EVENT_COLUMNS = ["event_id", "type", "flow_indices", "start", "duration", "shape", "delta"]


def write_matrix(path: Path, matrix: np.ndarray, float_format: str = FLOAT_FORMAT) -> Path:
    """Headerless CSV, one row per period, one column per flow."""
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(np.asarray(matrix, dtype=float)).to_csv(
        path, header=False, index=False, float_format=float_format
    )
    return path


def read_matrix(path: Path) -> np.ndarray:
    """Inverse of ``write_matrix``; rejects ragged rows and non-numeric cells."""
    if not path.exists():
        raise DataError(f"{path}: no such file")
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: empty matrix file") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: rows have differing column counts ({exc})") from None
    cells = raw.to_numpy(dtype=object)
    matrix = np.empty(cells.shape)
    for (row, column), cell in np.ndenumerate(cells):
        # short rows come back as NaN rather than text
        if not isinstance(cell, str):
            raise MatrixParseError(str(path), row, column, "")
        try:
            matrix[row, column] = float(cell)
        except ValueError:
            raise MatrixParseError(str(path), row, column, cell) from None
    return matrix


def events_frame(events: list[AnomalyEvent]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "event_id": event.event_id,
                "type": event.anomaly_type.value,
                "flow_indices": ";".join(str(flow) for flow in event.flows),
                "start": event.start,
                "duration": event.duration,
                "shape": event.shape.value,
                "delta": event.delta,
            }
            for event in events
        ],
        columns=EVENT_COLUMNS,
    )


def write_events(path: Path, events: list[AnomalyEvent]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    events_frame(events).to_csv(path, index=False)
    return path


def write_frame(path: Path, frame: pd.DataFrame, float_format: str = FLOAT_FORMAT) -> Path:
    """CSV with a header row; missing values are written as N/A."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=float_format, na_rep="N/A")
    return path


def write_model(path: Path, model: BaseModel) -> Path:
    """JSON echo of a pydantic model, aliases included."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        json.dump(model.model_dump(mode="json", by_alias=True), f, indent=2)
    return path


def _key_path(error: ValidationError) -> str:
    first = error.errors()[0]
    return ".".join(str(part) for part in first["loc"])


def parse_run_config(data: dict) -> RunConfig:
    """Validate a configuration document, reporting the first offending key."""
    try:
        return TypeAdapter(RunConfig).validate_python(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], key_path=_key_path(exc) or None) from None


def load_run_config(path: Path | None) -> RunConfig:
    """Run configuration from a JSON file; defaults when no path is given."""
    if path is None:
        return RunConfig()
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with path.open() as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return parse_run_config(data)
