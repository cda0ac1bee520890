"""Core raster types and binary morphology.

Coordinates are (row, col) everywhere; arrays are row-major. Label masks use
the four-class convention BG=0, LVBP=1, LVMYO=2, RVBP=3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, EmptyInput

BG = 0
LVBP = 1
LVMYO = 2
RVBP = 3
ALL_LABELS = (BG, LVBP, LVMYO, RVBP)


@dataclass(frozen=True)
class ImageGrid:
    """2D scalar field (T1 maps carry milliseconds) with pixel spacing in mm."""

    values: np.ndarray
    spacing_x: float = 1.0
    spacing_y: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if not (self.spacing_x > 0 and self.spacing_y > 0):
            raise ValueError("spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabelMask:
    """Per-pixel class labels restricted to {BG, LVBP, LVMYO, RVBP}."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.shape[0] < 1 or lab.shape[1] < 1:
            raise ValueError(f"labels must be a non-empty 2D array, got shape {lab.shape}")
        if lab.size and (lab.min() < 0 or lab.max() > 3):
            raise ValueError("labels must lie in {0, 1, 2, 3}")
        object.__setattr__(self, "labels", lab.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def region(self, label: int) -> np.ndarray:
        """Boolean mask of one class."""
        return self.labels == label


def _square_footprint() -> np.ndarray:
    return np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class StructuringElement:
    """Binary footprint with an anchor pixel. Default: fully-set 3x3 square."""

    footprint: np.ndarray = field(default_factory=_square_footprint)
    anchor: tuple[int, int] = (1, 1)

    def __post_init__(self):
        fp = np.asarray(self.footprint, dtype=bool)
        if fp.ndim != 2 or not fp.any():
            raise ValueError("footprint must be 2D with at least one set pixel")
        ar, ac = self.anchor
        if not (0 <= ar < fp.shape[0] and 0 <= ac < fp.shape[1]):
            raise ValueError("anchor must lie inside the footprint")
        object.__setattr__(self, "footprint", fp)

    def offsets(self) -> list[tuple[int, int]]:
        """Set-pixel displacements relative to the anchor."""
        ar, ac = self.anchor
        return [(int(r) - ar, int(c) - ac) for r, c in np.argwhere(self.footprint)]


DEFAULT_SE = StructuringElement()


def _shift(mask: np.ndarray, dr: int, dc: int, fill: bool) -> np.ndarray:
    """Translate a boolean mask by (dr, dc), padding with `fill`."""
    out = np.full_like(mask, fill)
    h, w = mask.shape
    rs = slice(max(dr, 0), min(h + dr, h))
    cs = slice(max(dc, 0), min(w + dc, w))
    rs_src = slice(max(-dr, 0), min(h - dr, h))
    cs_src = slice(max(-dc, 0), min(w - dc, w))
    out[rs_src, cs_src] = mask[rs, cs]
    return out


def erode(mask: np.ndarray, se: StructuringElement = DEFAULT_SE) -> np.ndarray:
    """Binary erosion: a pixel survives iff the SE anchored there fits in the
    foreground. Pixels outside the image count as background."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2 or m.size == 0:
        raise EmptyInput("mask must be a non-empty 2D grid")
    out = np.ones_like(m)
    for dr, dc in se.offsets():
        out &= _shift(m, dr, dc, fill=False)
    return out


def dilate(mask: np.ndarray, se: StructuringElement = DEFAULT_SE, iterations: int = 1) -> np.ndarray:
    """Binary dilation (the erosion adjoint under the same border policy)."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2 or m.size == 0:
        raise EmptyInput("mask must be a non-empty 2D grid")
    for _ in range(iterations):
        out = np.zeros_like(m)
        for dr, dc in se.offsets():
            out |= _shift(m, -dr, -dc, fill=False)
        m = out
    return m


def erode_to_fraction(mask: np.ndarray, fraction: float, se: StructuringElement = DEFAULT_SE) -> np.ndarray:
    """Erode repeatedly until the area drops to at most fraction * original.

    Returns the first mask meeting the bound, which may be empty.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    m = np.asarray(mask, dtype=bool)
    area0 = int(m.sum())
    if area0 == 0:
        raise EmptyInput("mask has no foreground pixels")
    bound = fraction * area0
    while m.sum() > bound:
        m = erode(m, se)
    return m


def hit_or_miss_junctions(mask: LabelMask, required: set[int]) -> list[tuple[int, int]]:
    """Pixels whose 2x2 window (pixel, right, down, down-right) contains every
    label in `required`. Windows clipped by the border are excluded. Output is
    sorted row-major as (row, col) pairs."""
    lab = mask.labels
    h, w = lab.shape
    if h < 2 or w < 2 or not required:
        return []
    hit = np.ones((h - 1, w - 1), dtype=bool)
    for cls in required:
        present = lab == cls
        hit &= (present[:-1, :-1] | present[:-1, 1:]
                | present[1:, :-1] | present[1:, 1:])
    return [(int(r), int(c)) for r, c in np.argwhere(hit)]


_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def connected_components(mask: np.ndarray) -> tuple[int, np.ndarray]:
    """4-connected components, numbered 1..k in first-encounter row-major order.

    Returns (count, int32 label map with 0 for background).
    """
    m = np.asarray(mask, dtype=bool)
    raw, count = ndimage.label(m, structure=_FOUR_CONN)
    if count == 0:
        return 0, np.zeros_like(raw, dtype=np.int32)
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    # renumber by first raster-scan appearance so ordering is part of the contract
    uniq, first_idx = np.unique(flat[nz], return_index=True)
    order = uniq[np.argsort(first_idx)]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(1, count + 1, dtype=np.int32)
    return count, remap[raw]


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape {a.shape} vs {b.shape}")
