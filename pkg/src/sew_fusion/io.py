"""
File Formats.

Strict CSV readers and writers for IMU logs, landmark tracks and result
tables; JSON result documents; YAML scenario and fusion configuration.
"""

import csv
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .bspline import Trajectory
from .errors import ConfigError, CsvFormatError, InvalidInputError
from .models import (
    CameraModel,
    FusionConfig,
    ImuLog,
    ResidualWeightPlan,
    ScalarSpectrum,
    ScenarioConfig,
    TrackSet,
)
from .simulate import PRESETS

IMU_HEADER = ("t", "gx", "gy", "gz", "ax", "ay", "az")
TRACKS_HEADER = ("track_id", "frame", "u", "v", "frame_time")
TRAJECTORY_HEADER = ("t", "px", "py", "pz", "qw", "qx", "qy", "qz")

ANALYSIS_VERSION = 1


def format_value(value: Any) -> str:
    """Deterministic text form of a CSV cell (shortest round-trip floats)."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# =============================================================================
# CSV
# =============================================================================


def _read_rows(path: str | Path, header: Sequence[str]) -> list[tuple[int, list[str]]]:
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise CsvFormatError("file is empty, header required", line=1) from None
        if tuple(cell.strip() for cell in first) != tuple(header):
            raise CsvFormatError(f"header must be '{','.join(header)}'", line=1)
        rows = []
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(
                    f"expected {len(header)} columns, got {len(row)}", line=reader.line_num
                )
            rows.append((reader.line_num, row))
    return rows


def _parse_float(cell: str, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise CsvFormatError(f"not a number: '{cell}'", line=line) from None
    if not np.isfinite(value):
        raise CsvFormatError(f"non-finite value: '{cell}'", line=line)
    return value


def _parse_int(cell: str, line: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise CsvFormatError(f"not an integer: '{cell}'", line=line) from None


def read_imu_csv(path: str | Path) -> ImuLog:
    """Read an IMU log with header t,gx,gy,gz,ax,ay,az.

    Raises:
        CsvFormatError: On a bad header, ragged or non-numeric rows, or
            timestamps that are not strictly increasing
    """
    rows = _read_rows(path, IMU_HEADER)
    if len(rows) < 2:
        raise CsvFormatError("an IMU log needs at least 2 samples")
    values = np.empty((len(rows), 7))
    previous = -np.inf
    for i, (line, row) in enumerate(rows):
        values[i] = [_parse_float(cell, line) for cell in row]
        if values[i, 0] <= previous:
            raise CsvFormatError("timestamps must be strictly increasing", line=line)
        previous = values[i, 0]
    return ImuLog(values[:, 0], values[:, 1:4], values[:, 4:7])


def read_tracks_csv(path: str | Path) -> TrackSet:
    """Read landmark observations with header track_id,frame,u,v,frame_time."""
    rows = _read_rows(path, TRACKS_HEADER)
    track_id = np.empty(len(rows), dtype=np.int64)
    frame = np.empty(len(rows), dtype=np.int64)
    pixels = np.empty((len(rows), 2))
    frame_time = np.empty(len(rows))
    for i, (line, row) in enumerate(rows):
        track_id[i] = _parse_int(row[0], line)
        frame[i] = _parse_int(row[1], line)
        pixels[i] = (_parse_float(row[2], line), _parse_float(row[3], line))
        frame_time[i] = _parse_float(row[4], line)
    return TrackSet(track_id, frame, pixels, frame_time)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write a CSV table with exact header and deterministic number format."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise InvalidInputError(f"row has {len(row)} cells, header has {len(header)}")
            writer.writerow([format_value(value) for value in row])


def read_csv(path: str | Path, header: Sequence[str]) -> list[dict[str, str]]:
    """Read a table written by write_csv, checking the header exactly."""
    return [dict(zip(header, row, strict=True)) for _, row in _read_rows(path, header)]


def write_imu_csv(path: str | Path, imu: ImuLog) -> None:
    rows = np.column_stack([imu.times, imu.gyro, imu.accel])
    write_csv(path, IMU_HEADER, rows.tolist())


def write_tracks_csv(path: str | Path, tracks: TrackSet) -> None:
    rows = [
        (int(tid), int(frame), float(px[0]), float(px[1]), float(t))
        for tid, frame, px, t in zip(
            tracks.track_id, tracks.frame, tracks.pixels, tracks.frame_time, strict=True
        )
    ]
    write_csv(path, TRACKS_HEADER, rows)


def write_trajectory_csv(path: str | Path, traj: Trajectory, sample_rate: float) -> None:
    """Sample a trajectory over its valid interval: t, position, quaternion (w, x, y, z)."""
    if not sample_rate > 0:
        raise InvalidInputError(f"sample rate must be positive, got {sample_rate}")
    start, end = traj.valid_interval
    n = int(np.floor((end - start) * sample_rate + 1e-9)) + 1
    times = start + np.arange(n) / sample_rate
    positions, quats = traj.sample(times)
    write_csv(path, TRAJECTORY_HEADER, np.column_stack([times, positions, quats]).tolist())


# =============================================================================
# JSON
# =============================================================================


def dumps(data: Any) -> str:
    """Stable JSON text (sorted keys, 2-space indent, trailing newline)."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, data: Any) -> None:
    Path(path).write_text(dumps(data))


def spectrum_summary(spectrum: ScalarSpectrum) -> dict[str, float]:
    return {
        "n": spectrum.n,
        "sample_rate": spectrum.sample_rate,
        "energy": float(np.sum(spectrum.magnitudes**2)),
    }


def analysis_to_dict(
    plan: ResidualWeightPlan,
    gyro_spectrum: ScalarSpectrum,
    accel_spectrum: ScalarSpectrum,
    warnings: list[str] | None = None,
) -> dict[str, Any]:
    """Analysis document: requested qualities, spacings, predictions, spectra."""
    return {
        "version": ANALYSIS_VERSION,
        "plan": plan.to_dict(),
        "spectra": {
            "gyro": spectrum_summary(gyro_spectrum),
            "accel": spectrum_summary(accel_spectrum),
        },
        "warnings": list(warnings or []),
    }


def analysis_from_dict(data: dict[str, Any]) -> ResidualWeightPlan:
    """Parse the plan back out of an analysis document."""
    if data.get("version") != ANALYSIS_VERSION:
        raise ConfigError(f"unsupported analysis document version {data.get('version')}")
    try:
        return ResidualWeightPlan.from_dict(data["plan"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed analysis document: {exc}") from exc


# =============================================================================
# YAML
# =============================================================================


def load_yaml(path: str | Path) -> dict[str, Any]:
    """Load a YAML mapping with yaml.safe_load."""
    try:
        with open(path) as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def scenario_from_dict(data: dict[str, Any]) -> tuple[ScenarioConfig, FusionConfig]:
    """Split a scenario document into scenario and fusion settings.

    A `preset` key selects a built-in band plan; keys given in the
    document override the preset.
    """
    values = dict(data)
    values.pop("experiment", None)
    fusion = values.pop("fusion", None) or {}
    preset = values.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}' (valid: {', '.join(sorted(PRESETS))})")
        values = {**PRESETS[preset], **values}
    if not isinstance(fusion, dict):
        raise ConfigError("fusion section must be a mapping")
    return ScenarioConfig.from_dict(values), FusionConfig.from_dict(fusion)


def experiment_settings(data: dict[str, Any], name: str) -> dict[str, Any]:
    """Keyword settings for one experiment from the `experiment` section."""
    section = data.get("experiment") or {}
    if not isinstance(section, dict):
        raise ConfigError("experiment section must be a mapping")
    settings = section.get(name) or {}
    if not isinstance(settings, dict):
        raise ConfigError(f"experiment.{name} must be a mapping")
    return dict(settings)


def load_scenario(path: str | Path) -> tuple[ScenarioConfig, FusionConfig]:
    return scenario_from_dict(load_yaml(path))


def load_fusion_config(path: str | Path) -> tuple[FusionConfig, CameraModel | None]:
    """Fusion settings plus an optional camera section."""
    data = load_yaml(path)
    camera = data.pop("camera", None)
    return FusionConfig.from_dict(data), CameraModel.from_dict(camera) if camera else None
