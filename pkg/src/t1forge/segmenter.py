"""Probabilistic segmentation backends.

The built-in backend replaces the deep network with a parametric shape model
(LV disc + myocardial annulus + RV crescent) fitted by multi-start Nelder-Mead
on a region-homogeneity cost. T plausible segmentations are drawn by jittering
the fitted parameters with per-parameter scales derived from the local cost
curvature, and the best-fit residual cost doubles as the evidence score
(higher = less plausible, so "reject when above threshold" reads naturally).

A second backend loads sample stacks written by any external network.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.special import expit

from .errors import DegenerateImage, DimensionMismatch, FormatError, NoFit
from .imaging import ImageGrid, LabelMask

PARAM_NAMES = ("lv_row", "lv_col", "r_blood", "r_outer", "rv_row", "rv_col", "r_rv")

DEFAULT_T = 100
DEFAULT_COST_CAP = 0.15
_MIN_STRUCT_AREA = 24.0   # px at full resolution; scaled with the fit grid
_EMPTY_PENALTY = 0.05


@dataclass(frozen=True)
class SegmentationSampleSet:
    """T plausible label masks plus a scalar badness score."""

    samples: np.ndarray          # (T, H, W) uint8
    evidence: float              # higher = less plausible
    backend: str
    soft_probs: np.ndarray | None = None   # optional (T, 4, H, W)

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 3 or s.shape[0] < 1:
            raise DimensionMismatch(f"samples must be (T, H, W) with T >= 1, got {s.shape}")
        if s.size and s.max() > 3:
            raise FormatError("sample labels must lie in {0..3}")
        object.__setattr__(self, "samples", s.astype(np.uint8))
        if self.soft_probs is not None:
            p = np.asarray(self.soft_probs, dtype=np.float64)
            if p.shape != (s.shape[0], 4, s.shape[1], s.shape[2]):
                raise DimensionMismatch(f"soft_probs shape {p.shape} does not match samples {s.shape}")
            object.__setattr__(self, "soft_probs", p)

    @property
    def t(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[1], self.samples.shape[2]


def _normalise(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        raise DegenerateImage("constant image cannot be normalised")
    return (values - lo) / (hi - lo)


def _rasterize_grid(params: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    cy, cx, r_bp, r_out, rvy, rvx, r_rv = params
    d_lv = np.hypot(rows - cy, cols - cx)
    d_rv = np.hypot(rows - rvy, cols - rvx)
    labels = np.zeros(rows.shape, dtype=np.uint8)
    labels[(d_rv <= r_rv) & (d_lv > r_out)] = 3
    labels[(d_lv > r_bp) & (d_lv <= r_out)] = 2
    labels[d_lv <= r_bp] = 1
    return labels


def rasterize_params(params: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Label image of the parametric heart model."""
    rows, cols = np.indices(shape, dtype=np.float64)
    return _rasterize_grid(params, rows, cols)


class _CostModel:
    """Region-homogeneity cost of model parameters on one (normalised) image.

    Class membership ramps linearly over `tau` pixels across each circle so
    the cost varies smoothly with the parameters; hard rasterisation would be
    piecewise constant and stall the simplex search at sub-pixel offsets.
    """

    def __init__(self, img: np.ndarray, min_area: float, tau: float = 1.2,
                 origin: tuple[float, float] = (0.0, 0.0)):
        self.img = img.ravel()
        self.img_sq = self.img * self.img
        rows, cols = np.indices(img.shape, dtype=np.float64)
        self.rows = rows.ravel() + origin[0]
        self.cols = cols.ravel() + origin[1]
        self.n = img.size
        self.h, self.w = img.shape
        self.origin = origin
        self.min_area = min_area
        self.tau = tau

    def _ramp(self, r: float, d: np.ndarray) -> np.ndarray:
        # 1 inside the circle, 0 outside, linear across a tau-wide rim
        return np.clip((r - d) / self.tau + 0.5, 0.0, 1.0)

    def __call__(self, params: np.ndarray) -> float:
        cy, cx, r_bp, r_out, rvy, rvx, r_rv = params
        if (r_bp < 1.5 or r_out < r_bp + 1.0 or r_rv < 1.5
                or not (self.origin[0] - self.h < cy < self.origin[0] + 2 * self.h)
                or not (self.origin[1] - self.w < cx < self.origin[1] + 2 * self.w)):
            return 10.0 + abs(r_bp) + abs(r_out) + abs(r_rv)
        d_lv = np.hypot(self.rows - cy, self.cols - cx)
        d_rv = np.hypot(self.rows - rvy, self.cols - rvx)
        s_bp = self._ramp(r_bp, d_lv)
        s_out = self._ramp(r_out, d_lv)
        s_rv = self._ramp(r_rv, d_rv) * (1.0 - s_out)
        cost = 0.0
        sse = 0.0
        w_bg = np.ones_like(s_bp)
        for w in (s_bp, s_out - s_bp, s_rv):
            w_bg -= w
            total = float(w.sum())
            if total < self.min_area:
                cost += _EMPTY_PENALTY * (1.0 - max(total, 0.0) / self.min_area)
            if total > 1e-9:
                s = float(w @ self.img)
                ss = float(w @ self.img_sq)
                sse += ss - s * s / total
        total = float(w_bg.sum())
        if total > 1e-9:
            s = float(w_bg @ self.img)
            ss = float(w_bg @ self.img_sq)
            sse += ss - s * s / total
        return cost + sse / self.n


def mask_cost(image: ImageGrid, mask: LabelMask) -> float:
    """Homogeneity cost of an arbitrary labelling on an image; the evidence
    score assigned to externally supplied segmentations."""
    if image.values.shape != mask.labels.shape:
        raise DimensionMismatch(f"image {image.values.shape} vs mask {mask.labels.shape}")
    img = _normalise(image.values)
    flat = mask.labels.ravel().astype(np.intp)
    cnt = np.bincount(flat, minlength=4).astype(np.float64)
    s = np.bincount(flat, weights=img.ravel(), minlength=4)
    ss = np.bincount(flat, weights=(img * img).ravel(), minlength=4)
    nz = cnt > 0
    sse = float((ss[nz] - s[nz] * s[nz] / cnt[nz]).sum())
    cost = sse / img.size
    for c in (1, 2, 3):
        if cnt[c] < _MIN_STRUCT_AREA:
            cost += _EMPTY_PENALTY * (1.0 - cnt[c] / _MIN_STRUCT_AREA)
    return cost


def _downsample2(img: np.ndarray) -> np.ndarray:
    h = img.shape[0] // 2 * 2
    w = img.shape[1] // 2 * 2
    return img[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


_CENTER_IDX = np.array([0, 1, 4, 5])
_RADIUS_IDX = np.array([2, 3, 6])


def _params_up(p: np.ndarray) -> np.ndarray:
    """Map params from a 2x2-pooled grid to its parent grid. Pooled pixel
    (i, j) is centred at (2i + 0.5, 2j + 0.5) in parent coordinates."""
    q = p.copy()
    q[_CENTER_IDX] = 2.0 * p[_CENTER_IDX] + 0.5
    q[_RADIUS_IDX] = 2.0 * p[_RADIUS_IDX]
    return q


def _params_down(p: np.ndarray) -> np.ndarray:
    q = p.copy()
    q[_CENTER_IDX] = (p[_CENTER_IDX] - 0.5) / 2.0
    q[_RADIUS_IDX] = p[_RADIUS_IDX] / 2.0
    return q


def _initial_guess(img: np.ndarray) -> np.ndarray:
    """Heuristic start: bright blobs are blood; the LV is the one whose
    surrounding ring is brightest (myocardium, not background)."""
    from scipy import ndimage

    h, w = img.shape
    thr = np.quantile(img, 0.90)
    bright = img >= thr
    lab, k = ndimage.label(bright)
    comps = []
    for c in range(1, k + 1):
        m = lab == c
        area = int(m.sum())
        if area < 20:
            continue
        cy, cx = np.argwhere(m).mean(axis=0)
        ring = ndimage.binary_dilation(m, iterations=3) & ~m
        ring_mean = float(img[ring].mean()) if ring.any() else 0.0
        comps.append((area, cy, cx, ring_mean))
    comps.sort(key=lambda c: -c[0])
    comps = comps[:3]
    if not comps:
        cy, cx = h / 2.0, w / 2.0
        r_bp = h / 8.0
        return np.array([cy, cx, r_bp, 1.45 * r_bp, cy, cx - 2.2 * r_bp, 1.2 * r_bp])
    lv = max(comps, key=lambda c: c[3])
    r_bp = max(math.sqrt(lv[0] / math.pi), 3.0)
    others = [c for c in comps if c is not lv]
    if others:
        rv = max(others, key=lambda c: c[0])
        rvy, rvx = rv[1], rv[2]
        r_rv = max(math.sqrt(rv[0] / math.pi) * 1.15, 4.0)
    else:
        rvy, rvx = lv[1], lv[2] - 2.2 * r_bp
        r_rv = 1.2 * r_bp
    return np.array([lv[1], lv[2], r_bp, 1.45 * r_bp, rvy, rvx, r_rv])


def _nm(cost, p0: np.ndarray, maxiter: int, simplex_step: float | None = None):
    options = {"maxiter": maxiter, "xatol": 0.02, "fatol": 1e-12}
    if simplex_step is not None:
        options["initial_simplex"] = np.vstack([p0, p0 + simplex_step * np.eye(7)])
    return optimize.minimize(cost, p0, method="Nelder-Mead", options=options)


def _fit(img: np.ndarray, rng: np.random.Generator, starts: int) -> tuple[np.ndarray, float]:
    """Coarse-to-fine multi-start search: explore at quarter resolution,
    refine the two best candidates at half, polish the winner at full."""
    half = _downsample2(img)
    quarter = _downsample2(half)
    cost_q = _CostModel(quarter, _MIN_STRUCT_AREA / 16.0)
    cost_h = _CostModel(half, _MIN_STRUCT_AREA / 4.0)
    guess = _params_down(_params_down(_initial_guess(img)))

    start_list = [guess]
    scale = np.array([2.0, 2.0, 1.0, 1.0, 3.0, 3.0, 1.5])
    for i in range(1, starts):
        p = guess + scale * rng.standard_normal(7)
        if i % 2 == 0:
            # swing the RV guess around the LV to dodge wrong-side minima
            ang = rng.uniform(0.0, 2.0 * math.pi)
            dist = p[3] + 0.7 * p[6]
            p[4] = p[0] + dist * math.sin(ang)
            p[5] = p[1] + dist * math.cos(ang)
        start_list.append(p)

    coarse = sorted((_nm(cost_q, p0, 150) for p0 in start_list), key=lambda r: r.fun)
    refined = sorted((_nm(cost_h, _params_up(r.x), 150, simplex_step=1.0) for r in coarse[:2]),
                     key=lambda r: r.fun)

    # sub-pixel polish on a crop around the candidate model, then a single
    # full-frame evaluation so evidence scores are comparable across subjects
    p = _params_up(refined[0].x)
    box = _model_bbox(p, img.shape, margin=12)
    r0, r1, c0, c1 = box
    cost_crop = _CostModel(img[r0:r1, c0:c1], _MIN_STRUCT_AREA, origin=(float(r0), float(c0)))
    res = _nm(cost_crop, p, 60, simplex_step=0.4)
    cost_full = _CostModel(img, _MIN_STRUCT_AREA)
    return res.x, float(cost_full(res.x))


def _model_bbox(params: np.ndarray, shape: tuple[int, int], margin: int) -> tuple[int, int, int, int]:
    cy, cx, _, r_out, rvy, rvx, r_rv = params
    r0 = int(math.floor(min(cy - r_out, rvy - r_rv))) - margin
    r1 = int(math.ceil(max(cy + r_out, rvy + r_rv))) + margin
    c0 = int(math.floor(min(cx - r_out, rvx - r_rv))) - margin
    c1 = int(math.ceil(max(cx + r_out, rvx + r_rv))) + margin
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, shape[0]), min(c1, shape[1])
    if r1 - r0 < 8 or c1 - c0 < 8:
        return 0, shape[0], 0, shape[1]
    return r0, r1, c0, c1


def _curvature_scales(cost, params: np.ndarray, c0: float,
                      jitter_scale: float) -> np.ndarray:
    """Per-parameter jitter SDs from the local cost curvature: flat directions
    move more, sharp ones less (Laplace-style). The scale is calibrated so a
    well-fitted noisy image yields sub-pixel boundary spread."""
    delta = 0.5
    sigmas = np.empty(7)
    floor_cost = max(c0, 1e-6)
    for i in range(7):
        ei = np.zeros(7)
        ei[i] = delta
        h = (cost(params + ei) - 2.0 * c0 + cost(params - ei)) / (delta * delta)
        if h <= 1e-12:
            sigmas[i] = 2.0
        else:
            sigmas[i] = math.sqrt(2.0 * floor_cost / h)
    return np.clip(jitter_scale * sigmas, 0.2, 2.5)


def segment_mc(image: ImageGrid, t: int = DEFAULT_T, seed: int = 0, *,
               starts: int = 6, jitter_scale: float = 0.4,
               cost_cap: float = DEFAULT_COST_CAP) -> SegmentationSampleSet:
    """Fit the shape model and draw `t` jittered segmentation samples.

    Deterministic given (image, t, seed). Raises DegenerateImage for constant
    input and NoFit when even the best fit stays above `cost_cap`.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    img = _normalise(image.values)
    rng = np.random.default_rng(seed)
    params, cost = _fit(img, rng, starts)
    if cost > cost_cap:
        raise NoFit(cost, cost_cap)

    r0, r1, c0, c1 = _model_bbox(params, img.shape, margin=14)
    cost_crop = _CostModel(img[r0:r1, c0:c1], _MIN_STRUCT_AREA,
                           origin=(float(r0), float(c0)))
    sigmas = _curvature_scales(cost_crop, params, cost_crop(params), jitter_scale)
    rows, cols = np.indices((r1 - r0, c1 - c0), dtype=np.float64)
    rows += r0
    cols += c0
    samples = np.zeros((t, *img.shape), dtype=np.uint8)
    for k in range(t):
        p = params + sigmas * rng.standard_normal(7)
        p[2] = max(p[2], 1.0)
        p[3] = max(p[3], p[2] + 1.0)
        p[6] = max(p[6], 1.0)
        samples[k, r0:r1, c0:c1] = _rasterize_grid(p, rows, cols)
    return SegmentationSampleSet(samples=samples, evidence=cost, backend="mc-shape-fit")


def samples_from_mask(image: ImageGrid, mask: LabelMask, t: int, seed: int = 0,
                      jitter_px: float = 1.0) -> SegmentationSampleSet:
    """Wrap a fixed segmentation (e.g. from an external tool) as a sample set:
    `t` randomly translated copies, evidence = the mask's cost on the image."""
    if image.values.shape != mask.labels.shape:
        raise DimensionMismatch(f"image {image.values.shape} vs mask {mask.labels.shape}")
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    evidence = mask_cost(image, mask)
    rng = np.random.default_rng(seed)
    samples = np.empty((t, *mask.labels.shape), dtype=np.uint8)
    for k in range(t):
        dr, dc = np.rint(rng.normal(0.0, jitter_px, 2)).astype(int)
        shifted = np.zeros_like(mask.labels)
        h, w = mask.labels.shape
        rs = slice(max(dr, 0), min(h + dr, h))
        cs = slice(max(dc, 0), min(w + dc, w))
        rs_src = slice(max(-dr, 0), min(h - dr, h))
        cs_src = slice(max(-dc, 0), min(w - dc, w))
        shifted[rs_src, cs_src] = mask.labels[rs, cs]
        samples[k] = shifted
    return SegmentationSampleSet(samples=samples, evidence=evidence, backend="mask-jitter")


# ---------------------------------------------------------------------------
# sample-stack file format: one-line JSON header, then T label planes of
# one byte per pixel, row-major

def write_samples(path: str | Path, sample_set: SegmentationSampleSet) -> None:
    h, w = sample_set.shape
    header = {
        "width": w,
        "height": h,
        "T": sample_set.t,
        "evidence": sample_set.evidence,
        "backend": sample_set.backend,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(np.ascontiguousarray(sample_set.samples).tobytes())


def load_samples(path: str | Path) -> SegmentationSampleSet:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: bad JSON header: {e}") from e
    try:
        w = int(header["width"])
        h = int(header["height"])
        t = int(header["T"])
        evidence = float(header["evidence"])
        backend = str(header.get("backend", "external"))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: incomplete header: {e}") from e
    if w < 1 or h < 1 or t < 1:
        raise FormatError(f"{path}: non-positive dimensions in header")
    body = raw[nl + 1:]
    if len(body) != t * h * w:
        raise DimensionMismatch(
            f"{path}: body has {len(body)} bytes, header promises {t} x {h} x {w}")
    samples = np.frombuffer(body, dtype=np.uint8).reshape(t, h, w)
    if samples.max(initial=0) > 3:
        raise FormatError(f"{path}: sample labels outside {{0..3}}")
    return SegmentationSampleSet(samples=samples.copy(), evidence=evidence, backend=backend)
