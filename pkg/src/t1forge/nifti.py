"""Minimal single-file NIfTI-1 reader.

Deliberately a strict subset: uncompressed .nii with magic "n+1\\0" and a
float32/float64/int16/uint16 body. Anything else fails loudly. Header fields
are read at their fixed byte offsets (dim at 40, datatype at 70, pixdim at 76,
vox_offset at 108, scl_slope at 112, scl_inter at 116, magic at 344).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, GzipUnsupported, SliceOutOfRange, TruncatedFile, UnsupportedDatatype
from .imaging import ImageGrid

HEADER_SIZE = 348

# NIfTI-1 datatype codes for the supported subset
_DTYPES = {
    4: np.dtype(np.int16),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}


def read_nifti(path: str | Path, slice_index: int = 0) -> tuple[ImageGrid, dict]:
    """Read one 2D slice of an uncompressed NIfTI-1 file.

    Values are rescaled as stored * scl_slope + scl_inter when scl_slope is
    non-zero. 3D volumes need `slice_index`; 2D images ignore it only when 0.
    Returns the grid plus a metadata dict of the decoded header fields.
    """
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raise GzipUnsupported(f"{path}: gzip stream; only uncompressed .nii is supported")
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(f"{path}: {len(raw)} bytes is shorter than the 348-byte header")

    magic = raw[344:348]
    if magic == b"ni1\x00":
        raise BadMagic(f"{path}: two-file NIfTI (ni1) is not supported")
    if magic != b"n+1\x00":
        raise BadMagic(f"{path}: magic {magic!r} is not NIfTI-1")

    # endianness is signalled by sizeof_hdr decoding to 348
    if struct.unpack_from("<i", raw, 0)[0] == HEADER_SIZE:
        bo = "<"
    elif struct.unpack_from(">i", raw, 0)[0] == HEADER_SIZE:
        bo = ">"
    else:
        raise BadMagic(f"{path}: sizeof_hdr is not 348 in either byte order")

    dim = struct.unpack_from(bo + "8h", raw, 40)
    datatype = struct.unpack_from(bo + "h", raw, 70)[0]
    pixdim = struct.unpack_from(bo + "8f", raw, 76)
    vox_offset = struct.unpack_from(bo + "f", raw, 108)[0]
    scl_slope = struct.unpack_from(bo + "f", raw, 112)[0]
    scl_inter = struct.unpack_from(bo + "f", raw, 116)[0]

    ndim = dim[0]
    if ndim not in (2, 3):
        raise UnsupportedDatatype(f"{path}: {ndim}-dimensional images are not supported")
    if datatype not in _DTYPES:
        raise UnsupportedDatatype(f"{path}: datatype code {datatype}")
    dtype = _DTYPES[datatype].newbyteorder(bo)

    nx, ny = dim[1], dim[2]
    nz = dim[3] if ndim == 3 else 1
    if nx < 1 or ny < 1 or nz < 1:
        raise TruncatedFile(f"{path}: non-positive dim {dim[:4]}")
    if not (0 <= slice_index < nz):
        raise SliceOutOfRange(f"{path}: slice {slice_index} outside [0, {nz})")

    offset = int(vox_offset) if vox_offset >= HEADER_SIZE else HEADER_SIZE
    itemsize = dtype.itemsize
    plane_bytes = nx * ny * itemsize
    start = offset + slice_index * plane_bytes
    end = start + plane_bytes
    if len(raw) < end:
        raise TruncatedFile(f"{path}: need {end} bytes for slice {slice_index}, have {len(raw)}")

    stored = np.frombuffer(raw, dtype=dtype, count=nx * ny, offset=start)
    # NIfTI stores x fastest; reshape to (rows=ny, cols=nx)
    stored = stored.reshape(ny, nx).astype(np.float64)
    values = stored * scl_slope + scl_inter if scl_slope != 0.0 else stored

    sx = float(pixdim[1]) if pixdim[1] > 0 else 1.0
    sy = float(pixdim[2]) if pixdim[2] > 0 else 1.0
    grid = ImageGrid(values=values, spacing_x=sx, spacing_y=sy)
    meta = {
        "dim": list(dim),
        "datatype": int(datatype),
        "pixdim": [float(p) for p in pixdim],
        "vox_offset": float(vox_offset),
        "scl_slope": float(scl_slope),
        "scl_inter": float(scl_inter),
        "magic": magic.decode("ascii", errors="replace"),
        "byte_order": bo,
        "slice_index": slice_index,
    }
    return grid, meta
