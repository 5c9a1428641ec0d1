"""Readers and writers for field dumps, CSV exports and flat key-value reports."""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import GridError
from .grid import FieldSeries, GridSpec, ScalarField, setting

logger = logging.getLogger(__name__)

FFLD_MAGIC = b'FFLD'
FFLD_VERSION = 1
FFLD_HEADER = np.dtype([
    ('magic', 'S4'),
    ('version', '<u4'),
    ('dim', '<u4'),
    ('points_per_axis', '<u4'),
    ('half_extent', '<f8'),
    ('time_stamp', '<f8'),
])
DEFAULT_CSV_MAX_NODES = 10_000


def write_field(path, field: ScalarField, time_stamp: float = 0.0) -> Path:
    """Write one field in the FFLD binary format (little-endian header then row-major f64 payload)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.zeros(1, dtype=FFLD_HEADER)
    header[0] = (FFLD_MAGIC, FFLD_VERSION, field.grid.dim, field.grid.points_per_axis,
                 field.grid.half_extent, float(time_stamp))
    with open(path, 'wb') as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(field.values, dtype='<f8').tobytes())
    return path


def read_field(path, grid: GridSpec | None = None) -> tuple[ScalarField, float]:
    """Read an FFLD file.

    Args:
        path: file to read
        grid: expected grid; when omitted a grid is rebuilt from the header

    Returns:
        The field and its time stamp
    """
    raw = Path(path).read_bytes()
    if len(raw) < FFLD_HEADER.itemsize:
        raise GridError(f"{path}: file too short for an FFLD header")
    header = np.frombuffer(raw[:FFLD_HEADER.itemsize], dtype=FFLD_HEADER)[0]
    if header['magic'] != FFLD_MAGIC:
        raise GridError(f"{path}: bad magic bytes {header['magic']!r}")
    if int(header['version']) != FFLD_VERSION:
        raise GridError(f"{path}: unsupported FFLD version {int(header['version'])}")

    dim, m = int(header['dim']), int(header['points_per_axis'])
    half_extent = float(header['half_extent'])
    payload = np.frombuffer(raw[FFLD_HEADER.itemsize:], dtype='<f8')
    if payload.size != m ** dim:
        raise GridError(f"{path}: payload holds {payload.size} values, header announces {m ** dim}")

    if grid is None:
        grid = GridSpec(dim=dim, half_extent=half_extent, points_per_axis=m)
    elif grid.dim != dim or grid.points_per_axis != m or not np.isclose(grid.half_extent, half_extent):
        raise GridError(f"{path}: stored grid ({dim}D, M={m}, L={half_extent}) does not match the expected grid")
    return ScalarField(grid, payload.astype(float)), float(header['time_stamp'])


def write_history(directory, prefix: str, history: FieldSeries, stride: int = 1) -> list[Path]:
    """Dump every `stride`-th stamp of a history, always including the last one."""
    directory = Path(directory)
    stride = max(1, int(stride))
    indices = list(range(0, len(history), stride))
    if indices[-1] != len(history) - 1:
        indices.append(len(history) - 1)
    written = [
        write_field(directory / f"{prefix}_{k:05d}.ffld", history.fields[k], history.times[k])
        for k in indices
    ]
    logger.debug("Wrote %d %s dumps to %s", len(written), prefix, directory)
    return written


def field_to_frame(field: ScalarField) -> pd.DataFrame:
    """(index tuple, value) table of a small field."""
    limit = setting('FRONTFLOW_CSV_MAX_NODES', DEFAULT_CSV_MAX_NODES)
    if field.grid.node_count > limit:
        raise GridError(f"CSV export is limited to {limit} nodes, field has {field.grid.node_count}")
    index = np.indices(field.grid.shape).reshape(field.grid.dim, -1)
    columns = {f'i{axis}': index[axis] for axis in range(field.grid.dim)}
    columns['value'] = field.flat
    return pd.DataFrame(columns)


def write_field_csv(path, field: ScalarField) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    field_to_frame(field).to_csv(path, index=False)
    return path


def write_frame(path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_flat_text(path, values: dict) -> Path:
    """Write `key = value` lines; floats use repr precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in values.items():
        if isinstance(value, (float, np.floating)):
            value = repr(float(value))
        lines.append(f"{key} = {value}")
    path.write_text('\n'.join(lines) + '\n')
    return path


def read_flat_text(path) -> dict[str, str]:
    entries = {}
    for line in Path(path).read_text().splitlines():
        if '=' in line:
            key, value = line.split('=', 1)
            entries[key.strip()] = value.strip()
    return entries
