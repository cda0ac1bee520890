"""Raw interchange format: one-line JSON header followed by the pixel body.

Header: {"width", "height", "spacing_x", "spacing_y", "dtype", "encoding"}.
The body is either a base64 line of the little-endian row-major bytes or CSV
rows. Used for images, label planes and anything tests need to round-trip
bit-exactly.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .imaging import ImageGrid, LabelMask

_DTYPES = {
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
    "uint8": np.dtype("u1"),
    "int16": np.dtype("<i2"),
}


def write_grid(path: str | Path, grid: ImageGrid, dtype: str = "float64",
               encoding: str = "base64") -> None:
    _write(path, grid.values, dtype, encoding, grid.spacing_x, grid.spacing_y)


def write_mask(path: str | Path, mask: LabelMask, encoding: str = "base64") -> None:
    _write(path, mask.labels, "uint8", encoding, 1.0, 1.0)


def _write(path, values: np.ndarray, dtype: str, encoding: str,
           sx: float, sy: float) -> None:
    if dtype not in _DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}")
    if encoding not in ("base64", "csv"):
        raise FormatError(f"unsupported encoding {encoding!r}")
    arr = np.ascontiguousarray(values.astype(_DTYPES[dtype]))
    header = {
        "width": int(arr.shape[1]),
        "height": int(arr.shape[0]),
        "spacing_x": sx,
        "spacing_y": sy,
        "dtype": dtype,
        "encoding": encoding,
    }
    if encoding == "base64":
        body = base64.b64encode(arr.tobytes()).decode("ascii")
    else:
        fmt = "%d" if dtype in ("uint8", "int16") else "%r"
        body = "\n".join(",".join(fmt % v for v in row) for row in arr.tolist())
    Path(path).write_text(json.dumps(header, sort_keys=True) + "\n" + body + "\n")


def read_array(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read any raw-grid file back as (array, header)."""
    text = Path(path).read_text()
    nl = text.find("\n")
    if nl < 0:
        raise FormatError(f"{path}: missing body")
    try:
        header = json.loads(text[:nl])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: bad JSON header: {e}") from e
    for key in ("width", "height", "dtype", "encoding"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    w, h = int(header["width"]), int(header["height"])
    dtype = header["dtype"]
    if dtype not in _DTYPES:
        raise FormatError(f"{path}: unsupported dtype {dtype!r}")
    body = text[nl + 1:]
    if header["encoding"] == "base64":
        try:
            buf = base64.b64decode(body.strip().encode("ascii"), validate=True)
        except Exception as e:
            raise FormatError(f"{path}: bad base64 body: {e}") from e
        if len(buf) != w * h * _DTYPES[dtype].itemsize:
            raise FormatError(f"{path}: body has {len(buf)} bytes, expected {w * h * _DTYPES[dtype].itemsize}")
        arr = np.frombuffer(buf, dtype=_DTYPES[dtype]).reshape(h, w)
    elif header["encoding"] == "csv":
        rows = [r for r in body.splitlines() if r.strip()]
        if len(rows) != h:
            raise FormatError(f"{path}: {len(rows)} CSV rows, expected {h}")
        try:
            arr = np.array([[float(v) for v in r.split(",")] for r in rows])
        except ValueError as e:
            raise FormatError(f"{path}: bad CSV body: {e}") from e
        if arr.shape != (h, w):
            raise FormatError(f"{path}: CSV shape {arr.shape}, expected {(h, w)}")
        arr = arr.astype(_DTYPES[dtype])
    else:
        raise FormatError(f"{path}: unsupported encoding {header['encoding']!r}")
    return arr.copy(), header


def read_grid(path: str | Path) -> ImageGrid:
    arr, header = read_array(path)
    return ImageGrid(values=arr.astype(np.float64),
                     spacing_x=float(header.get("spacing_x", 1.0)),
                     spacing_y=float(header.get("spacing_y", 1.0)))


def read_mask(path: str | Path) -> LabelMask:
    arr, _ = read_array(path)
    return LabelMask(labels=arr.astype(np.uint8))
