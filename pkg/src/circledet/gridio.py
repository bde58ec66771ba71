"""Binary .grid files: one JSON header line plus little-endian float32 payload."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

GRID_DTYPE = "f32"
GRID_LAYOUT = "row-major"


class GridFormatError(ValueError):
    pass


def write_grid(path: str | Path, values: np.ndarray, scale: int) -> None:
    """Write a (h, w) or (h, w, c) array as a .grid file.

    `scale` records the downsampling factor between input pixels and grid
    cells.
    """
    values = np.asarray(values)
    if values.ndim == 2:
        values = values[:, :, None]
    if values.ndim != 3:
        raise GridFormatError(f"grid payload must be 2- or 3-dimensional, got shape {values.shape}")
    h, w, c = values.shape
    header = {
        "width": w,
        "height": h,
        "channels": c,
        "dtype": GRID_DTYPE,
        "layout": GRID_LAYOUT,
        "scale": int(scale),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("ascii") + b"\n")
        f.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_grid(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a .grid file back as a float64 (h, w, c) array and its scale."""
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GridFormatError(f"{path}: malformed grid header: {exc}") from exc
    for key in ("width", "height", "channels", "dtype", "layout", "scale"):
        if key not in header:
            raise GridFormatError(f"{path}: grid header missing field {key!r}")
    if header["dtype"] != GRID_DTYPE:
        raise GridFormatError(f"{path}: unsupported dtype {header['dtype']!r}, expected {GRID_DTYPE!r}")
    if header["layout"] != GRID_LAYOUT:
        raise GridFormatError(f"{path}: unsupported layout {header['layout']!r}, expected {GRID_LAYOUT!r}")
    w, h, c = header["width"], header["height"], header["channels"]
    expected = w * h * c * 4
    if len(payload) != expected:
        raise GridFormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(h, w, c)
    return values.astype(np.float64), int(header["scale"])
