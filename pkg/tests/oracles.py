"""Independent reference implementations used to freeze expected values.

Everything here is deliberately written the slow, obvious way (explicit
loops, quadrature) and shares no code with the package under test.
"""

from __future__ import annotations

import math
import struct

import numpy as np
from scipy import integrate


# --- morphology ---

def erode_bruteforce(mask: np.ndarray, offsets) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for r in range(h):
        for c in range(w):
            ok = True
            for dr, dc in offsets:
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not mask[rr, cc]:
                    ok = False
                    break
            out[r, c] = ok
    return out


def flood_fill_components(mask: np.ndarray) -> int:
    """4-connected component count by explicit stack flood fill."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    count = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                count += 1
                stack = [(r, c)]
                seen[r, c] = True
                while stack:
                    y, x = stack.pop()
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                            seen[yy, xx] = True
                            stack.append((yy, xx))
    return count


def junctions_bruteforce(labels: np.ndarray, required: set[int]) -> list[tuple[int, int]]:
    h, w = labels.shape
    hits = []
    for r in range(h - 1):
        for c in range(w - 1):
            window = {int(labels[r, c]), int(labels[r, c + 1]),
                      int(labels[r + 1, c]), int(labels[r + 1, c + 1])}
            if required <= window:
                hits.append((r, c))
    return hits


# --- quantiles (R-7, by hand) ---

def quantile_r7(values, p: float) -> float:
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 1:
        return vals[0]
    h = (n - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    return vals[lo] + (h - lo) * (vals[hi] - vals[lo])


# --- distribution CDFs by quadrature ---

def t_pdf(x: float, df: float) -> float:
    return (math.gamma((df + 1) / 2.0)
            / (math.sqrt(df * math.pi) * math.gamma(df / 2.0))
            * (1.0 + x * x / df) ** (-(df + 1) / 2.0))


def t_cdf_quad(x: float, df: float) -> float:
    if x < 0:
        return 1.0 - t_cdf_quad(-x, df)
    tail, _ = integrate.quad(t_pdf, x, np.inf, args=(df,))
    return 1.0 - tail


def f_pdf(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    log_num = (d1 / 2.0) * math.log(d1 / d2) + (d1 / 2.0 - 1.0) * math.log(x)
    log_den = ((d1 + d2) / 2.0) * math.log1p(d1 * x / d2)
    log_beta = (math.lgamma(d1 / 2.0) + math.lgamma(d2 / 2.0)
                - math.lgamma((d1 + d2) / 2.0))
    return math.exp(log_num - log_den - log_beta)


def f_cdf_quad(x: float, d1: float, d2: float) -> float:
    if x <= 0:
        return 0.0
    val, _ = integrate.quad(f_pdf, 0.0, x, args=(d1, d2), limit=200)
    return min(val, 1.0)


# --- NIfTI-1 header encoder (byte offsets per the standard) ---

def build_nifti(dim, datatype: int, body: bytes, *, pixdim=(1, 1, 1), scl_slope=1.0,
                scl_inter=0.0, magic=b"n+1\x00", vox_offset=348.0,
                byte_order="<") -> bytes:
    header = bytearray(348)
    struct.pack_into(byte_order + "i", header, 0, 348)
    dims = [len(dim), *dim] + [1] * (7 - len(dim))
    struct.pack_into(byte_order + "8h", header, 40, *dims)
    struct.pack_into(byte_order + "h", header, 70, datatype)
    bitpix = {2: 8, 4: 16, 16: 32, 64: 64, 512: 16}.get(datatype, 32)
    struct.pack_into(byte_order + "h", header, 72, bitpix)
    pd = [1.0, *pixdim] + [0.0] * (7 - len(pixdim))
    struct.pack_into(byte_order + "8f", header, 76, *pd)
    struct.pack_into(byte_order + "f", header, 108, vox_offset)
    struct.pack_into(byte_order + "f", header, 112, scl_slope)
    struct.pack_into(byte_order + "f", header, 116, scl_inter)
    header[344:348] = magic
    pad = b"\x00" * (int(vox_offset) - 348) if vox_offset > 348 else b""
    return bytes(header) + pad + body
