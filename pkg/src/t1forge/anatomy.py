"""Anatomy derivation from a final segmentation mask.

RV insertion points are the meeting places of background, LV myocardium and
RV blood pool, found with the 2x2 hit-or-miss scan and clustered by angle
about the myocardial centroid. The septum is the angular sector between the
two points that faces the RV; everything else is free wall. Coordinates are
(row, col); reported junction positions refer to 2x2 window centres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCentroid,
    DimensionMismatch,
    EmptyROI,
    NoJunctions,
    SingleCluster,
)
from .imaging import (
    BG,
    LVBP,
    LVMYO,
    RVBP,
    ImageGrid,
    LabelMask,
    erode_to_fraction,
    hit_or_miss_junctions,
)
from .stats import quantile

TWO_PI = 2.0 * math.pi

# clusters closer than this are treated as one arc of junction pixels
MIN_CLUSTER_SEPARATION = math.radians(10.0)


@dataclass(frozen=True)
class AnatomyPartition:
    rv1: tuple[float, float]
    rv2: tuple[float, float]
    centroid: tuple[float, float]
    lvivs: np.ndarray           # boolean masks; lvivs | lvfw == myocardium
    lvfw: np.ndarray
    lv_roi: np.ndarray
    rv_roi: np.ndarray


def _centroid(mask: np.ndarray) -> tuple[float, float]:
    pts = np.argwhere(mask)
    return float(pts[:, 0].mean()), float(pts[:, 1].mean())


def insertion_points(mask: LabelMask) -> tuple[tuple[float, float], tuple[float, float]]:
    """Detect the two RV insertion points. RV1 is the one at the smaller
    atan2 angle about the myocardial centroid."""
    junctions = hit_or_miss_junctions(mask, {BG, LVMYO, RVBP})
    if not junctions:
        raise NoJunctions("no background/myocardium/RV junction pixels")
    myo = mask.region(LVMYO)
    cy, cx = _centroid(myo)
    pts = np.asarray(junctions, dtype=np.float64) + 0.5  # window centres
    angles = np.arctan2(pts[:, 0] - cy, pts[:, 1] - cx)
    if pts.shape[0] < 2:
        raise SingleCluster("a single junction pixel cannot define two points")

    order = np.argsort(angles)
    sorted_angles = angles[order]
    gaps = np.diff(sorted_angles, append=sorted_angles[0] + TWO_PI)
    gap_order = np.argsort(gaps)
    cut_a, cut_b = int(gap_order[-2]), int(gap_order[-1])
    if gaps[cut_a] < MIN_CLUSTER_SEPARATION:  # second-largest gap
        raise SingleCluster("junction pixels form a single angular arc")

    lo, hi = min(cut_a, cut_b), max(cut_a, cut_b)
    cluster1 = order[lo + 1:hi + 1]
    cluster2 = np.concatenate([order[hi + 1:], order[:lo + 1]])
    out = []
    for idx in (cluster1, cluster2):
        p = pts[idx]
        out.append((float(p[:, 0].mean()), float(p[:, 1].mean())))
    out.sort(key=lambda p: math.atan2(p[0] - cy, p[1] - cx))
    return out[0], out[1]


def partition_myocardium(mask: LabelMask, rv1: tuple[float, float],
                         rv2: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Split the myocardium into septum (LVIVS) and free wall (LVFW).

    Septum = myocardial pixels whose angle about the centroid falls in the
    arc from RV1 to RV2 that contains the RV direction. RV1 == RV2 is the
    zero-width convention: empty septum, everything free wall.
    """
    myo = mask.region(LVMYO)
    if not myo.any():
        raise DegenerateCentroid("empty myocardium")
    if tuple(rv1) == tuple(rv2):
        return np.zeros_like(myo), myo.copy()
    cy, cx = _centroid(myo)
    a1 = math.atan2(rv1[0] - cy, rv1[1] - cx)
    a2 = math.atan2(rv2[0] - cy, rv2[1] - cx)

    rv = mask.region(RVBP)
    if rv.any():
        ry, rx = _centroid(rv)
        a_rv = math.atan2(ry - cy, rx - cx)
        w12 = (a2 - a1) % TWO_PI
        if (a_rv - a1) % TWO_PI <= w12:
            start, width = a1, w12
        else:
            start, width = a2, (a1 - a2) % TWO_PI
    else:
        # no RV to point at: fall back to the smaller arc
        w12 = (a2 - a1) % TWO_PI
        start, width = (a1, w12) if w12 <= TWO_PI - w12 else (a2, (a1 - a2) % TWO_PI)

    rows, cols = np.nonzero(myo)
    theta = np.arctan2(rows - cy, cols - cx)
    member = np.mod(theta - start, TWO_PI) <= width
    lvivs = np.zeros_like(myo)
    lvivs[rows[member], cols[member]] = True
    lvfw = myo & ~lvivs
    return lvivs, lvfw


def blood_roi(mask: LabelMask, image: ImageGrid) -> tuple[np.ndarray, np.ndarray]:
    """Blood-pool ROIs: erode each pool to 1/3 of its area, then drop pixels
    below Q1 - 1.5 IQR of the eroded pool (papillary/trabeculae rejection)."""
    if mask.labels.shape != image.values.shape:
        raise DimensionMismatch(f"mask {mask.labels.shape} vs image {image.values.shape}")
    rois = []
    for cls, name in ((LVBP, "LV"), (RVBP, "RV")):
        pool = mask.region(cls)
        if not pool.any():
            raise EmptyROI(f"{name} blood pool is empty")
        eroded = erode_to_fraction(pool, 1.0 / 3.0)
        if not eroded.any():
            raise EmptyROI(f"{name} blood pool vanished at 1/3-area erosion")
        vals = image.values[eroded]
        q1 = quantile(vals, 0.25)
        q3 = quantile(vals, 0.75)
        cutoff = q1 - 1.5 * (q3 - q1)
        roi = eroded & (image.values >= cutoff)
        if not roi.any():
            raise EmptyROI(f"{name} ROI empty after IQR rejection")
        rois.append(roi)
    return rois[0], rois[1]


def derive_partition(mask: LabelMask, image: ImageGrid) -> AnatomyPartition:
    """Full anatomy pass: insertion points, septal split and blood ROIs."""
    rv1, rv2 = insertion_points(mask)
    lvivs, lvfw = partition_myocardium(mask, rv1, rv2)
    lv_roi, rv_roi = blood_roi(mask, image)
    return AnatomyPartition(rv1=rv1, rv2=rv2, centroid=_centroid(mask.region(LVMYO)),
                            lvivs=lvivs, lvfw=lvfw, lv_roi=lv_roi, rv_roi=rv_roi)
