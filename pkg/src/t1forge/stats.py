"""Agreement, cohort and hypothesis-test statistics.

Quantiles use linear interpolation (R-7) throughout, matching the IQR rules
in the anatomy module. t and F tail probabilities are computed from the
regularised incomplete beta function (continued-fraction evaluation), so the
whole module is closed-form and independently checkable by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConstantSeries,
    DimensionMismatch,
    LengthMismatch,
    TooFew,
    ZeroVariance,
)

# ---------------------------------------------------------------------------
# regularised incomplete beta and the distribution functions built on it

_MAX_ITER = 300
_FPMIN = 1e-300
_EPS = 3e-16


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 0.5
    tail = 0.5 * betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return 1.0 - tail if t > 0 else tail


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p-value for a t statistic."""
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def t_quantile(p: float, df: float) -> float:
    """Inverse t CDF by bisection (adequate for test statistics)."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    lo, hi = 0.0, 2.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_cdf(f: float, d1: float, d2: float) -> float:
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if f <= 0:
        return 0.0
    return betainc_reg(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2))


# ---------------------------------------------------------------------------
# quantiles (R-7) and IQR filtering

def quantile(values: Sequence[float], p: float) -> float:
    """Linear-interpolation (R-7) quantile; the one convention used package-wide."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), p, method="linear"))


def remove_outliers(values: Sequence[float]) -> list[float]:
    """Drop values beyond 3 IQR outside [Q1, Q3]; stable order preserved.

    The rule is applied until nothing more is dropped (extreme values inflate
    the first-pass IQR), which makes the filter idempotent on any input.
    """
    vals = [float(v) for v in values]
    if len(vals) < 4:
        raise TooFew(f"need at least 4 values, got {len(vals)}")
    while len(vals) >= 4:
        q1 = quantile(vals, 0.25)
        q3 = quantile(vals, 0.75)
        iqr = q3 - q1
        lo = q1 - 3.0 * iqr
        hi = q3 + 3.0 * iqr
        kept = [v for v in vals if lo <= v <= hi]
        if len(kept) == len(vals):
            break
        vals = kept
    return vals


# ---------------------------------------------------------------------------
# agreement

def dice(a: np.ndarray, b: np.ndarray) -> float:
    """Dice overlap 2|A^B| / (|A|+|B|); two empty masks count as 1."""
    am = np.asarray(a, dtype=bool)
    bm = np.asarray(b, dtype=bool)
    if am.shape != bm.shape:
        raise DimensionMismatch(f"shape {am.shape} vs {bm.shape}")
    sa = int(am.sum())
    sb = int(bm.sum())
    if sa + sb == 0:
        return 1.0
    return 2.0 * int((am & bm).sum()) / (sa + sb)


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    sd: float
    loa_lower: float
    loa_upper: float
    p_value: float
    n: int


def bland_altman(x: Sequence[float], y: Sequence[float]) -> BlandAltman:
    """Bland-Altman agreement of y against x: differences d = y - x, bias,
    1.96-SD limits of agreement and a paired t-test of d against zero."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape:
        raise LengthMismatch(f"{xv.size} vs {yv.size} values")
    n = xv.size
    if n < 2:
        raise TooFew(f"need at least 2 pairs, got {n}")
    d = yv - xv
    bias = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        p = 1.0
    else:
        t = bias / (sd / math.sqrt(n))
        p = t_sf_two_sided(t, n - 1)
    return BlandAltman(bias=bias, sd=sd,
                       loa_lower=bias - 1.96 * sd, loa_upper=bias + 1.96 * sd,
                       p_value=p, n=n)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape:
        raise LengthMismatch(f"{xv.size} vs {yv.size} values")
    if xv.size < 2:
        raise TooFew(f"need at least 2 pairs, got {xv.size}")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeries("correlation undefined for a constant series")
    return float(dx @ dy) / (sx * sy)


# ---------------------------------------------------------------------------
# reference ranges

@dataclass(frozen=True)
class ReferenceRange:
    mean: float
    lower: float
    upper: float
    n: int


def reference_range(values: Sequence[float]) -> ReferenceRange:
    """95% prediction interval mean -/+ t_{0.975,n-1} * SD * sqrt(1 + 1/n)."""
    vals = np.asarray(values, dtype=np.float64)
    n = vals.size
    if n < 2:
        raise TooFew(f"need at least 2 values, got {n}")
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    half = t_quantile(0.975, n - 1) * sd * math.sqrt(1.0 + 1.0 / n)
    return ReferenceRange(mean=mean, lower=mean - half, upper=mean + half, n=n)


# ---------------------------------------------------------------------------
# hypothesis tests

def paired_t(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; zero-variance differences report (0, 1)."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape:
        raise LengthMismatch(f"{xv.size} vs {yv.size} values")
    if xv.size < 2:
        raise TooFew(f"need at least 2 pairs, got {xv.size}")
    d = xv - yv
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return 0.0, 1.0
    t = float(d.mean()) / (sd / math.sqrt(d.size))
    return t, t_sf_two_sided(t, d.size - 1)


def unpaired_t(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sided pooled-variance (classic Student) unpaired t-test."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    nx, ny = xv.size, yv.size
    if nx < 2 or ny < 2:
        raise TooFew(f"need at least 2 values per sample, got {nx} and {ny}")
    vx = float(xv.var(ddof=1))
    vy = float(yv.var(ddof=1))
    df = nx + ny - 2
    pooled = ((nx - 1) * vx + (ny - 1) * vy) / df
    if pooled == 0.0:
        return 0.0, 1.0
    t = (float(xv.mean()) - float(yv.mean())) / math.sqrt(pooled * (1.0 / nx + 1.0 / ny))
    return t, t_sf_two_sided(t, df)


def f_var(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Two-sided F-test of equal variances, ratio larger/smaller on top."""
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.size < 2 or yv.size < 2:
        raise TooFew(f"need at least 2 values per sample, got {xv.size} and {yv.size}")
    vx = float(xv.var(ddof=1))
    vy = float(yv.var(ddof=1))
    if vx == 0.0 and vy == 0.0:
        raise ZeroVariance("both samples have zero variance")
    if vx >= vy:
        f, d1, d2 = (vx / vy if vy > 0 else math.inf), xv.size - 1, yv.size - 1
    else:
        f, d1, d2 = vy / vx, yv.size - 1, xv.size - 1
    if math.isinf(f):
        return f, 0.0
    p = 2.0 * (1.0 - f_cdf(f, d1, d2))
    return f, min(p, 1.0)


def zscore(value: float, mean: float, sd: float) -> float:
    if sd <= 0:
        raise ZeroVariance("z-score needs a positive SD")
    return (value - mean) / sd
