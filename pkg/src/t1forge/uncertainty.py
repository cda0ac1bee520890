"""Sample-set aggregation: mean probabilities, final mask, cross-entropy
uncertainty map, and the per-region T1 sampling distribution.

The map is u(x) = -(1/T) sum_t ln pbar_{s_t(x)}(x) in nats, with 0 ln 0 := 0.
For hard labels this is exactly the entropy of the empirical per-pixel label
histogram, so unanimous pixels score 0 and the ceiling is ln 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anatomy import insertion_points, partition_myocardium
from .errors import DimensionMismatch, EmptyRegion, T1ForgeError
from .imaging import LVMYO, ImageGrid, LabelMask
from .segmenter import SegmentationSampleSet

LN2 = math.log(2.0)
LN4 = math.log(4.0)

REGIONS = ("globalLV", "LVIVS", "LVFW")


@dataclass(frozen=True)
class ProbabilityMaps:
    """Per-class mean probability maps, (4, H, W); pixels sum to 1."""

    probs: np.ndarray
    source: str          # "hard_labels" or "soft_maps"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != 4:
            raise DimensionMismatch(f"probs must be (4, H, W), got {p.shape}")
        object.__setattr__(self, "probs", p)


def mean_probability(samples: SegmentationSampleSet) -> ProbabilityMaps:
    """Average the sample stack: per-sample soft maps when the backend
    supplied them, otherwise the hard-label empirical frequencies."""
    if samples.soft_probs is not None:
        return ProbabilityMaps(probs=samples.soft_probs.mean(axis=0), source="soft_maps")
    t, h, w = samples.samples.shape
    probs = np.empty((4, h, w), dtype=np.float64)
    for c in range(4):
        probs[c] = (samples.samples == c).sum(axis=0) / t
    return ProbabilityMaps(probs=probs, source="hard_labels")


def final_mask(prob: ProbabilityMaps) -> LabelMask:
    """Per-pixel argmax; ties go to the lowest class id."""
    return LabelMask(labels=np.argmax(prob.probs, axis=0).astype(np.uint8))


def uncertainty_map(prob: ProbabilityMaps, samples: SegmentationSampleSet) -> np.ndarray:
    """Cross-entropy of the samples against the mean maps, per pixel, in nats."""
    if prob.probs.shape[1:] != samples.shape:
        raise DimensionMismatch(f"maps {prob.probs.shape[1:]} vs samples {samples.shape}")
    t = samples.t
    u = np.zeros(samples.shape, dtype=np.float64)
    for c in range(4):
        count = (samples.samples == c).sum(axis=0)
        hit = count > 0
        if hit.any():
            p = np.maximum(prob.probs[c][hit], 1e-300)
            u[hit] -= (count[hit] / t) * np.log(p)
    return u


def _region_mask(label_mask: LabelMask, region: str) -> np.ndarray:
    if region == "globalLV":
        return label_mask.region(LVMYO)
    rv1, rv2 = insertion_points(label_mask)
    lvivs, lvfw = partition_myocardium(label_mask, rv1, rv2)
    return lvivs if region == "LVIVS" else lvfw


def t1_sampling_distribution(image: ImageGrid, samples: SegmentationSampleSet,
                             region: str = "globalLV") -> tuple[float, float]:
    """Mean and sample SD of the region-mean T1 across the T segmentations.

    Spread here is segmentation uncertainty expressed in milliseconds. T = 1
    reports SD 0 by convention.
    """
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")
    if image.values.shape != samples.shape:
        raise DimensionMismatch(f"image {image.values.shape} vs samples {samples.shape}")
    means = np.empty(samples.t, dtype=np.float64)
    for k in range(samples.t):
        mask_k = LabelMask(labels=samples.samples[k])
        try:
            m = _region_mask(mask_k, region)
        except T1ForgeError as e:
            raise EmptyRegion(f"sample {k}: {region} undefined ({e})") from e
        if not m.any():
            raise EmptyRegion(f"sample {k}: {region} contains no pixels")
        means[k] = image.values[m].mean()
    sd = float(means.std(ddof=1)) if samples.t > 1 else 0.0
    return float(means.mean()), sd
