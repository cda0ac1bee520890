"""Myocardial T1 quantification and blood-pool correction.

The correction model is linear in the blood relaxation rate: a cohort fit of
myocardial T1 against blood R1 supplies the slope alpha and the cohort mean
rate, and each subject's T1 moves by alpha * (R_mean - R_patient). Units ride
along explicitly (R1 in 1/ms, T1 in ms) because slope magnitudes alone do not
identify them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .anatomy import AnatomyPartition
from .errors import (
    ConstantPredictor,
    EmptyRegion,
    EmptyROI,
    TooFewSubjects,
    UnitMismatch,
)
from .imaging import LVMYO, ImageGrid, LabelMask

R1_UNITS = "1/ms"
T1_UNITS = "ms"


@dataclass(frozen=True)
class BloodModel:
    alpha: float                 # ms per (1/ms), slope of T1 on R1
    intercept: float
    r2: float
    mse: float
    r_mean: float                # cohort mean blood R1
    units: dict = field(default_factory=lambda: {"x": R1_UNITS, "y": T1_UNITS})

    def save(self, path: str | Path) -> None:
        doc = {"alpha": self.alpha, "intercept": self.intercept, "r2": self.r2,
               "mse": self.mse, "r_mean": self.r_mean, "units": self.units}
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BloodModel":
        doc = json.loads(Path(path).read_text())
        return cls(alpha=float(doc["alpha"]), intercept=float(doc["intercept"]),
                   r2=float(doc["r2"]), mse=float(doc["mse"]),
                   r_mean=float(doc["r_mean"]), units=dict(doc["units"]))


def regional_t1(image: ImageGrid, mask: LabelMask,
                partition: AnatomyPartition) -> dict[str, tuple[float, float]]:
    """Mean and sample SD of T1 over the whole myocardium, septum and free wall."""
    regions = {
        "global": mask.region(LVMYO),
        "lvivs": partition.lvivs,
        "lvfw": partition.lvfw,
    }
    out = {}
    for name, m in regions.items():
        vals = image.values[m]
        if vals.size == 0:
            raise EmptyRegion(f"region {name} has no pixels")
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[name] = (float(vals.mean()), sd)
    return out


def blood_r1(image: ImageGrid, lv_roi: np.ndarray,
             rv_roi: np.ndarray) -> tuple[float, float, float, float]:
    """(LV T1, RV T1, combined blood T1, R1). Combined = mean of the pools;
    R1 is its reciprocal in 1/ms."""
    if not lv_roi.any() or not rv_roi.any():
        raise EmptyROI("blood ROI is empty")
    lv = float(image.values[lv_roi].mean())
    rv = float(image.values[rv_roi].mean())
    t1 = 0.5 * (lv + rv)
    if t1 <= 0:
        raise EmptyROI(f"non-physical blood T1 {t1}")
    return lv, rv, t1, 1.0 / t1


def fit_blood_model(myocardial_t1, blood_r1_values) -> BloodModel:
    """OLS of myocardial T1 on blood R1 over the cohort."""
    y = np.asarray(myocardial_t1, dtype=np.float64)
    x = np.asarray(blood_r1_values, dtype=np.float64)
    if y.shape != x.shape:
        raise TooFewSubjects(f"{y.size} T1 values vs {x.size} R1 values")
    if y.size < 3:
        raise TooFewSubjects(f"need at least 3 subjects, got {y.size}")
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise ConstantPredictor("blood R1 is constant across the cohort")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float((y - y.mean()) @ (y - y.mean()))
    r2 = 1.0 if ss_res == 0.0 else 1.0 - ss_res / ss_tot
    return BloodModel(alpha=slope, intercept=intercept, r2=r2,
                      mse=ss_res / y.size, r_mean=float(x.mean()))


def correct_t1(t1_uncorrected: float, r_patient: float, model: BloodModel,
               r_units: str = R1_UNITS) -> float:
    """Blood-corrected T1: uncorrected + alpha * (R_mean - R_patient)."""
    if r_units != model.units["x"]:
        raise UnitMismatch(f"r_patient in {r_units!r}, model fitted in {model.units['x']!r}")
    return t1_uncorrected + model.alpha * (model.r_mean - r_patient)


@dataclass
class T1Report:
    """Per-subject quantification record (JSON schema_version 1)."""

    subject_id: str
    t1_global: float | None = None
    t1_global_sd: float | None = None
    t1_lvivs: float | None = None
    t1_lvivs_sd: float | None = None
    t1_lvfw: float | None = None
    t1_lvfw_sd: float | None = None
    t1_blood_lv: float | None = None
    t1_blood_rv: float | None = None
    t1_blood: float | None = None
    r1_blood: float | None = None
    t1_global_corrected: float | None = None
    t1_lvivs_corrected: float | None = None
    t1_lvfw_corrected: float | None = None
    sampling_sd: dict = field(default_factory=dict)   # region -> SD over samples
    prob_source: str = "hard_labels"
    qc: dict = field(default_factory=dict)
    accepted: bool = False
    rejection_reason: str | None = None
    group: str = ""

    SCHEMA_VERSION = 1

    def to_dict(self) -> dict:
        doc = {"schema_version": self.SCHEMA_VERSION}
        for key in ("subject_id", "group", "accepted", "rejection_reason",
                    "t1_global", "t1_global_sd", "t1_lvivs", "t1_lvivs_sd",
                    "t1_lvfw", "t1_lvfw_sd", "t1_blood_lv", "t1_blood_rv",
                    "t1_blood", "r1_blood", "t1_global_corrected",
                    "t1_lvivs_corrected", "t1_lvfw_corrected",
                    "sampling_sd", "prob_source", "qc"):
            doc[key] = getattr(self, key)
        return doc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
