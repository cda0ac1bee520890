"""Synthetic mid-ventricular short-axis T1 phantom.

Geometry: an LV blood-pool disc inside a myocardial annulus, plus an RV
blood-pool crescent formed by an RV disc clipped against the outer LV circle.
The crescent meets the annulus along a contact arc whose two endpoints are the
ground-truth RV insertion points (available in closed form), which makes the
phantom an oracle for the anatomy and QC stages. All randomness flows through
one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import GeometryInfeasible
from .imaging import BG, LVBP, LVMYO, RVBP, ImageGrid, LabelMask

TWO_PI = 2.0 * math.pi

CORRUPTION_MODES = ("wrong_plane", "motion_ghosting", "mask_failure")


@dataclass(frozen=True)
class PhantomSpec:
    size: int = 192
    lv_center: tuple[float, float] = (96.0, 96.0)  # (row, col)
    lv_blood_radius: float = 24.0
    lv_outer_radius: float = 34.0
    rv_angle_deg: float = 180.0     # direction of the RV centre seen from the LV centre
    rv_distance: float = 48.0
    rv_radius: float = 30.0
    t1_lv_blood: float = 1550.0
    t1_rv_blood: float = 1550.0
    t1_myocardium: float = 930.0
    t1_background: float = 300.0
    noise_sd: float = 0.0
    spacing: float = 0.9
    seed: int = 0

    def rv_center(self) -> tuple[float, float]:
        theta = math.radians(self.rv_angle_deg)
        return (self.lv_center[0] + self.rv_distance * math.sin(theta),
                self.lv_center[1] + self.rv_distance * math.cos(theta))


@dataclass(frozen=True)
class PhantomTruth:
    image: ImageGrid
    mask: LabelMask
    rv1: tuple[float, float]        # insertion points, (row, col)
    rv2: tuple[float, float]
    septal_start: float             # sector start angle, radians in [0, 2pi)
    septal_width: float             # CCW width, radians
    true_t1: dict = field(default_factory=dict)
    spec: PhantomSpec | None = None

    def septal_mask(self) -> np.ndarray:
        """Ground-truth LVIVS pixel set (myocardium inside the septal sector)."""
        lab = self.mask.labels
        rows, cols = np.indices(lab.shape)
        cy, cx = self.spec.lv_center
        theta = np.arctan2(rows - cy, cols - cx)
        rel = np.mod(theta - self.septal_start, TWO_PI)
        return (lab == LVMYO) & (rel <= self.septal_width)


def _distance_fields(size: int, lv: tuple[float, float], rv: tuple[float, float]):
    rows, cols = np.indices((size, size), dtype=np.float64)
    d_lv = np.hypot(rows - lv[0], cols - lv[1])
    d_rv = np.hypot(rows - rv[0], cols - rv[1])
    return d_lv, d_rv


def generate(spec: PhantomSpec) -> PhantomTruth:
    """Rasterise the phantom and record its analytic ground truth."""
    if not (0.0 < spec.lv_blood_radius < spec.lv_outer_radius):
        raise GeometryInfeasible("need 0 < blood radius < outer radius")
    if spec.rv_radius <= 0:
        raise GeometryInfeasible("RV radius must be positive")
    if spec.noise_sd < 0:
        raise GeometryInfeasible("noise SD must be non-negative")
    d = spec.rv_distance
    r_out, r_rv = spec.lv_outer_radius, spec.rv_radius
    if not (abs(r_out - r_rv) < d < r_out + r_rv):
        raise GeometryInfeasible(
            f"RV circle (distance {d}, radius {r_rv}) must cross the outer LV circle")

    lv = spec.lv_center
    rv = spec.rv_center()
    d_lv, d_rv = _distance_fields(spec.size, lv, rv)
    labels = np.zeros((spec.size, spec.size), dtype=np.uint8)
    labels[(d_rv <= r_rv) & (d_lv > r_out)] = RVBP
    labels[(d_lv > spec.lv_blood_radius) & (d_lv <= r_out)] = LVMYO
    labels[d_lv <= spec.lv_blood_radius] = LVBP
    for cls in (LVBP, LVMYO, RVBP):
        if not (labels == cls).any():
            raise GeometryInfeasible(f"class {cls} rasterised empty; grid too small?")

    t1 = {BG: spec.t1_background, LVBP: spec.t1_lv_blood,
          LVMYO: spec.t1_myocardium, RVBP: spec.t1_rv_blood}
    values = np.choose(labels, [t1[BG], t1[LVBP], t1[LVMYO], t1[RVBP]]).astype(np.float64)
    if spec.noise_sd > 0:
        rng = np.random.default_rng(spec.seed)
        values = values + rng.normal(0.0, spec.noise_sd, values.shape)

    # insertion points: intersections of the outer LV circle with the RV circle
    a = (r_out ** 2 - r_rv ** 2 + d ** 2) / (2.0 * d)
    h = math.sqrt(max(r_out ** 2 - a ** 2, 0.0))
    theta = math.radians(spec.rv_angle_deg)
    u = (math.sin(theta), math.cos(theta))
    perp = (math.cos(theta), -math.sin(theta))
    base = (lv[0] + a * u[0], lv[1] + a * u[1])
    p1 = (base[0] + h * perp[0], base[1] + h * perp[1])
    p2 = (base[0] - h * perp[0], base[1] - h * perp[1])
    # order by angle about the LV centre, matching the anatomy convention
    ang1 = math.atan2(p1[0] - lv[0], p1[1] - lv[1])
    ang2 = math.atan2(p2[0] - lv[0], p2[1] - lv[1])
    if ang2 < ang1:
        p1, p2 = p2, p1
        ang1, ang2 = ang2, ang1

    # septal sector: the arc between the insertion angles that faces the RV
    w12 = (ang2 - ang1) % TWO_PI
    if (theta - ang1) % TWO_PI <= w12:
        start, width = ang1 % TWO_PI, w12
    else:
        start, width = ang2 % TWO_PI, (ang1 - ang2) % TWO_PI

    image = ImageGrid(values=values, spacing_x=spec.spacing, spacing_y=spec.spacing)
    return PhantomTruth(image=image, mask=LabelMask(labels=labels),
                        rv1=p1, rv2=p2, septal_start=start, septal_width=width,
                        true_t1={"background": t1[BG], "lv_blood": t1[LVBP],
                                 "myocardium": t1[LVMYO], "rv_blood": t1[RVBP]},
                        spec=spec)


def _shift_with_fill(arr: np.ndarray, dr: int, dc: int, fill) -> np.ndarray:
    out = np.full_like(arr, fill)
    h, w = arr.shape
    rs = slice(max(dr, 0), min(h + dr, h))
    cs = slice(max(dc, 0), min(w + dc, w))
    rs_src = slice(max(-dr, 0), min(h - dr, h))
    cs_src = slice(max(-dc, 0), min(w - dc, w))
    out[rs_src, cs_src] = arr[rs, cs]
    return out


def _smooth_texture(size: int, rng: np.random.Generator) -> np.ndarray:
    """Structureless low-frequency field spanning [0, 1]."""
    coarse = rng.standard_normal((8, 8))
    tex = ndimage.zoom(coarse, size / 8.0, order=3, grid_mode=True, mode="nearest")
    tex = tex[:size, :size]
    lo, hi = tex.min(), tex.max()
    return (tex - lo) / (hi - lo) if hi > lo else np.zeros_like(tex)


def corrupt(truth: PhantomTruth, mode: str, severity: float,
            seed: int = 0) -> tuple[ImageGrid, LabelMask]:
    """Degrade the phantom: misplanned acquisition, motion ghosting, or a
    broken segmentation mask. severity 0 returns the input unchanged."""
    if mode not in CORRUPTION_MODES:
        raise ValueError(f"unknown corruption mode {mode!r}")
    if not (0.0 <= severity <= 1.0):
        raise ValueError(f"severity must lie in [0, 1], got {severity}")
    img = truth.image.values.copy()
    labels = truth.mask.labels.copy()
    if severity == 0.0:
        return (ImageGrid(img, truth.image.spacing_x, truth.image.spacing_y),
                LabelMask(labels))
    rng = np.random.default_rng(seed)
    spec = truth.spec

    if mode == "wrong_plane":
        tex01 = _smooth_texture(img.shape[0], rng)
        tex = spec.t1_background + tex01 * (spec.t1_lv_blood - spec.t1_background)
        img = (1.0 - severity) * img + severity * tex

    elif mode == "motion_ghosting":
        # convex mix with rolled replicas keeps the image mean exactly
        shift = img.shape[0] // 5 + int(rng.integers(-3, 4))
        w = 0.5 * severity
        img = ((1.0 - w) * img
               + 0.5 * w * np.roll(img, shift, axis=0)
               + 0.5 * w * np.roll(img, -shift, axis=0))

    else:  # mask_failure: image stays clean, the mask breaks
        cy, cx = spec.lv_center
        # drop a myocardial sector centred on the septum
        drop_width = severity * (TWO_PI / 3.0)
        if drop_width > 0:
            rows, cols = np.indices(labels.shape)
            theta = np.arctan2(rows - cy, cols - cx)
            centre = math.radians(spec.rv_angle_deg)
            rel = np.mod(theta - (centre - drop_width / 2.0), TWO_PI)
            labels[(labels == LVMYO) & (rel <= drop_width)] = BG
        # dilation leak of the myocardium into background
        leak = int(round(2.0 * severity))
        if leak > 0:
            myo = labels == LVMYO
            grown = ndimage.binary_dilation(myo, iterations=leak)
            labels[grown & (labels == BG)] = LVMYO
        # translate the whole mask, spilling off the grid
        mag = severity * 0.9 * spec.lv_outer_radius
        phi = rng.uniform(0.0, TWO_PI)
        dr = int(round(mag * math.sin(phi)))
        dc = int(round(mag * math.cos(phi)))
        if dr or dc:
            labels = _shift_with_fill(labels, -dr, -dc, BG)

    return (ImageGrid(img, truth.image.spacing_x, truth.image.spacing_y),
            LabelMask(labels))


def batch_specs(base: PhantomSpec, count: int, seed: int,
                vary_myo_t1: tuple[float, float] | None = None,
                vary_sector: bool = False) -> list[PhantomSpec]:
    """Derive `count` per-subject specs with independent seeds and, optionally,
    randomised myocardial T1 and septal orientation."""
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(count):
        s = replace(base, seed=seed + i + 1)
        if vary_myo_t1 is not None:
            lo, hi = vary_myo_t1
            s = replace(s, t1_myocardium=float(rng.uniform(lo, hi)))
        if vary_sector:
            s = replace(s, rv_angle_deg=float(rng.uniform(0.0, 360.0)))
        specs.append(s)
    return specs
