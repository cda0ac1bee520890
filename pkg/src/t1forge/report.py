"""Cohort report artefacts: box-plot tables, reference-range tables and
Bland-Altman series, as CSV plus small self-contained SVG files.

The SVG is written by hand so repeated runs are byte-identical; plotting
libraries embed volatile metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from . import stats
from .errors import EmptyCohort


@dataclass(frozen=True)
class BoxStats:
    group: str
    n: int
    median: float
    q1: float
    q3: float
    whisker_lo: float     # most extreme data within 1.5 IQR of the quartiles
    whisker_hi: float
    outliers: tuple


def box_stats(group: str, values) -> BoxStats:
    vals = sorted(float(v) for v in values)
    if not vals:
        raise EmptyCohort(f"group {group!r} has no values")
    q1 = stats.quantile(vals, 0.25)
    q3 = stats.quantile(vals, 0.75)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = [v for v in vals if lo_fence <= v <= hi_fence]
    outliers = tuple(v for v in vals if v < lo_fence or v > hi_fence)
    return BoxStats(group=group, n=len(vals), median=stats.quantile(vals, 0.5),
                    q1=q1, q3=q3, whisker_lo=min(inside), whisker_hi=max(inside),
                    outliers=outliers)


def read_cohort(path: str | Path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise EmptyCohort(f"{path}: no rows")
    return rows


def accepted_values(rows: list[dict], column: str) -> dict[str, list[float]]:
    """Per-group numeric values of one column over accepted rows."""
    groups: dict[str, list[float]] = {}
    for row in rows:
        if row.get("accepted") != "true":
            continue
        raw = row.get(column)
        if raw in (None, ""):
            continue
        groups.setdefault(row.get("group", ""), []).append(float(raw))
    if not groups:
        raise EmptyCohort(f"no accepted rows carry column {column!r}")
    return groups


# ---------------------------------------------------------------------------
# SVG helpers

def _svg_header(width: int, height: int) -> list[str]:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{width}" height="{height}" fill="white"/>']


def svg_boxplot(path: str | Path, boxes: list[BoxStats], title: str) -> None:
    width, height = 120 + 90 * len(boxes), 360
    top, bottom = 40, height - 60
    values = [v for b in boxes for v in
              (b.whisker_lo, b.whisker_hi, *b.outliers)]
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    lo -= 0.05 * span
    hi += 0.05 * span

    def y(v: float) -> float:
        return bottom - (v - lo) / (hi - lo) * (bottom - top)

    parts = _svg_header(width, height)
    parts.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
                 f'font-size="14">{title}</text>')
    parts.append(f'<line x1="60" y1="{top}" x2="60" y2="{bottom}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        parts.append(f'<text x="54" y="{y(v) + 4:.1f}" text-anchor="end">{v:.0f}</text>')
        parts.append(f'<line x1="56" y1="{y(v):.1f}" x2="60" y2="{y(v):.1f}" stroke="black"/>')
    for i, b in enumerate(boxes):
        cx = 110 + 90 * i
        half = 26
        parts.append(f'<line x1="{cx}" y1="{y(b.whisker_lo):.1f}" x2="{cx}" '
                     f'y2="{y(b.q1):.1f}" stroke="black"/>')
        parts.append(f'<line x1="{cx}" y1="{y(b.q3):.1f}" x2="{cx}" '
                     f'y2="{y(b.whisker_hi):.1f}" stroke="black"/>')
        for w in (b.whisker_lo, b.whisker_hi):
            parts.append(f'<line x1="{cx - 12}" y1="{y(w):.1f}" x2="{cx + 12}" '
                         f'y2="{y(w):.1f}" stroke="black"/>')
        parts.append(f'<rect x="{cx - half}" y="{y(b.q3):.1f}" width="{2 * half}" '
                     f'height="{y(b.q1) - y(b.q3):.1f}" fill="#9ecae1" stroke="black"/>')
        parts.append(f'<line x1="{cx - half}" y1="{y(b.median):.1f}" x2="{cx + half}" '
                     f'y2="{y(b.median):.1f}" stroke="black" stroke-width="2"/>')
        for v in b.outliers:
            parts.append(f'<circle cx="{cx}" cy="{y(v):.1f}" r="2.5" fill="none" '
                         f'stroke="black"/>')
        parts.append(f'<text x="{cx}" y="{bottom + 18}" text-anchor="middle">'
                     f'{b.group or "(all)"} (n={b.n})</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def svg_bland_altman(path: str | Path, x, y_vals, ba: stats.BlandAltman, title: str) -> None:
    width, height = 520, 360
    left, right, top, bottom = 70, width - 20, 40, height - 50
    means = [(a + b) / 2.0 for a, b in zip(x, y_vals)]
    diffs = [b - a for a, b in zip(x, y_vals)]
    mx_lo, mx_hi = min(means), max(means)
    my_lo = min(min(diffs), ba.loa_lower)
    my_hi = max(max(diffs), ba.loa_upper)
    sx = (mx_hi - mx_lo) or 1.0
    sy = (my_hi - my_lo) or 1.0
    mx_lo -= 0.05 * sx
    mx_hi += 0.05 * sx
    my_lo -= 0.1 * sy
    my_hi += 0.1 * sy

    def px(v):
        return left + (v - mx_lo) / (mx_hi - mx_lo) * (right - left)

    def py(v):
        return bottom - (v - my_lo) / (my_hi - my_lo) * (bottom - top)

    parts = _svg_header(width, height)
    parts.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for label, v, dash in (("bias", ba.bias, "4 3"),
                           ("loa", ba.loa_lower, "2 3"), ("loa", ba.loa_upper, "2 3")):
        parts.append(f'<line x1="{left}" y1="{py(v):.1f}" x2="{right}" y2="{py(v):.1f}" '
                     f'stroke="{"grey" if label == "bias" else "red"}" '
                     f'stroke-dasharray="{dash}"/>')
        parts.append(f'<text x="{right - 4}" y="{py(v) - 4:.1f}" text-anchor="end" '
                     f'fill="{"grey" if label == "bias" else "red"}">{v:.2f}</text>')
    for m, d in zip(means, diffs):
        parts.append(f'<circle cx="{px(m):.1f}" cy="{py(d):.1f}" r="3" fill="#3182bd" '
                     f'fill-opacity="0.7"/>')
    parts.append(f'<text x="{(left + right) / 2}" y="{height - 12}" text-anchor="middle">'
                 f'mean of pair</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# the report command

def write_report(cohort_csv: str | Path, out_dir: str | Path,
                 column: str = "t1_global") -> dict:
    """Emit box-plot, reference-range and (when a paired manual column is
    present) Bland-Altman artefacts for one cohort column."""
    rows = read_cohort(cohort_csv)
    groups = accepted_values(rows, column)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    boxes = [box_stats(name, vals) for name, vals in sorted(groups.items())]
    with open(out / f"boxplot_{column}.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["group", "n", "median", "q1", "q3",
                         "whisker_lo", "whisker_hi", "n_outliers"])
        for b in boxes:
            writer.writerow([b.group, b.n, repr(b.median), repr(b.q1), repr(b.q3),
                             repr(b.whisker_lo), repr(b.whisker_hi), len(b.outliers)])
    svg_boxplot(out / f"boxplot_{column}.svg", boxes, title=column)

    with open(out / f"reference_ranges_{column}.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["group", "n", "mean", "lower", "upper"])
        for name, vals in sorted(groups.items()):
            if len(vals) < 2:
                continue
            filtered = stats.remove_outliers(vals) if len(vals) >= 4 else vals
            rr = stats.reference_range(filtered)
            writer.writerow([name, rr.n, repr(rr.mean), repr(rr.lower), repr(rr.upper)])

    result = {"groups": len(boxes), "bland_altman": None}
    manual_col = f"{column}_manual"
    if any(manual_col in row and row[manual_col] not in (None, "") for row in rows):
        pairs = [(float(row[manual_col]), float(row[column])) for row in rows
                 if row.get("accepted") == "true"
                 and row.get(column) not in (None, "")
                 and row.get(manual_col) not in (None, "")]
        if len(pairs) >= 2:
            manual = [p[0] for p in pairs]
            auto = [p[1] for p in pairs]
            ba = stats.bland_altman(manual, auto)
            with open(out / f"bland_altman_{column}.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["bias", "sd", "loa_lower", "loa_upper", "p_value", "n"])
                writer.writerow([repr(ba.bias), repr(ba.sd), repr(ba.loa_lower),
                                 repr(ba.loa_upper), repr(ba.p_value), ba.n])
            svg_bland_altman(out / f"bland_altman_{column}.svg", manual, auto, ba,
                             title=f"{column}: automatic vs manual")
            result["bland_altman"] = {"bias": ba.bias, "n": ba.n}
    return result
