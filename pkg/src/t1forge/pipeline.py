"""Batch orchestration: config parsing, the per-subject pipeline, cohort
outputs, and the summary statistics.

Per-subject failures never abort a batch; they become rejection records with
exactly one reason code from REJECTION_REASONS. All randomness derives from
the config seed (per-subject seed = seed XOR subject index), so any level of
parallelism reproduces the serial output byte for byte. Timestamps live only
in the sidecar run.log.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import anatomy, benchmark, qc, rawgrid, stats, uncertainty
from .analysis import BloodModel, T1Report, blood_r1, correct_t1, fit_blood_model, regional_t1
from .errors import DegenerateImage, NoFit, T1ForgeError, TooFewSubjects, ConstantPredictor
from .nifti import read_nifti
from .segmenter import load_samples, segment_mc
from .uncertainty import t1_sampling_distribution

THREADS_ENV = "T1FORGE_THREADS"

REJECTION_REASONS = (
    "read_error",
    "degenerate_image",
    "no_fit",
    "qc_step1",
    "qc_step2",
    "anatomy_failure",
    "analysis_error",
)


class ConfigError(T1ForgeError):
    """Invalid pipeline configuration."""


@dataclass
class SubjectSpec:
    id: str
    image: str
    samples: str | None = None
    group: str = ""


@dataclass
class PipelineConfig:
    subjects: list[SubjectSpec]
    t: int = 100
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"
    qc_model: str | None = None
    qc_calibration: str | None = None
    blood_model: str | None = None
    fit_blood_from_cohort: bool = False

    def validate(self) -> None:
        if self.t < 1:
            raise ConfigError(f"t must be >= 1, got {self.t}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if bool(self.qc_model) == bool(self.qc_calibration):
            raise ConfigError("exactly one of qc_model / qc_calibration must be set")
        if not self.subjects:
            raise ConfigError("no subjects configured")
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ConfigError("subject ids must be unique")

    def effective_threads(self) -> int:
        cap = os.environ.get(THREADS_ENV)
        if cap:
            try:
                return max(1, min(self.threads, int(cap)))
            except ValueError as e:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from e
        return self.threads


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    cleaned = {k: v for k, v in (overrides or {}).items() if v is not None}
    # flag paths stay CWD-relative; config paths resolve against the config dir
    path_overrides = {k: cleaned.pop(k) for k in ("output_dir", "qc_model",
                                                  "qc_calibration", "blood_model")
                      if k in cleaned}
    doc.update(cleaned)
    base = Path(path).parent

    def resolve(p):
        return str(base / p) if p and not os.path.isabs(p) else (p or None)

    subjects = []
    for entry in doc.get("subjects", []):
        if "id" not in entry or "image" not in entry:
            raise ConfigError(f"subject entries need id and image: {entry}")
        subjects.append(SubjectSpec(id=str(entry["id"]), image=resolve(entry["image"]),
                                    samples=resolve(entry.get("samples")),
                                    group=str(entry.get("group", ""))))

    qc_model = resolve(doc.get("qc_model"))
    qc_calibration = resolve(doc.get("qc_calibration"))
    if "qc_model" in path_overrides or "qc_calibration" in path_overrides:
        qc_model = path_overrides.get("qc_model")
        qc_calibration = path_overrides.get("qc_calibration")
    cfg = PipelineConfig(
        subjects=subjects,
        t=int(doc.get("t", 100)),
        seed=int(doc.get("seed", 0)),
        threads=int(doc.get("threads", 1)),
        output_dir=path_overrides.get("output_dir") or resolve(str(doc.get("output_dir", "out"))),
        qc_model=qc_model,
        qc_calibration=qc_calibration,
        blood_model=path_overrides.get("blood_model") or resolve(doc.get("blood_model")),
        fit_blood_from_cohort=bool(doc.get("fit_blood_from_cohort", False)),
    )
    cfg.validate()
    return cfg


def _read_image(path: str):
    if path.endswith(".nii"):
        grid, _ = read_nifti(path)
        return grid
    return rawgrid.read_grid(path)


def process_subject(subject: SubjectSpec, seed: int, t: int, threshold: float,
                    classifier: qc.QCClassifier) -> T1Report:
    """Run one subject through segmentation, QC, anatomy and quantification."""
    report = T1Report(subject_id=subject.id, group=subject.group)
    try:
        image = _read_image(subject.image)
    except (OSError, T1ForgeError, ValueError) as e:
        report.rejection_reason = "read_error"
        report.qc = {"error": str(e)}
        return report

    try:
        if subject.samples:
            samples = load_samples(subject.samples)
        else:
            samples = segment_mc(image, t=t, seed=seed)
    except DegenerateImage:
        report.rejection_reason = "degenerate_image"
        return report
    except NoFit as e:
        report.rejection_reason = "no_fit"
        report.qc = {"step1_score": e.cost, "step1_threshold": threshold}
        return report
    except (OSError, T1ForgeError) as e:
        report.rejection_reason = "read_error"
        report.qc = {"error": str(e)}
        return report

    prob = uncertainty.mean_probability(samples)
    mask = uncertainty.final_mask(prob)
    umap = uncertainty.uncertainty_map(prob, samples)
    report.prob_source = prob.source
    features = qc.extract_features(mask, umap, samples.evidence)
    decision = qc.run_qc(samples.evidence, threshold, classifier, features)
    report.qc = {
        "step1_score": decision.step1_score,
        "step1_threshold": decision.step1_threshold,
        "step1_pass": decision.step1_pass,
        "step2_probability": decision.step2_probability,
        "step2_pass": decision.step2_pass,
        "overall_accept": decision.overall_accept,
    }
    if not decision.overall_accept:
        report.rejection_reason = "qc_step1" if not decision.step1_pass else "qc_step2"
        return report

    try:
        partition = anatomy.derive_partition(mask, image)
    except T1ForgeError:
        report.rejection_reason = "anatomy_failure"
        return report

    try:
        regions = regional_t1(image, mask, partition)
        lv_t1, rv_t1, blood_t1, r1 = blood_r1(image, partition.lv_roi, partition.rv_roi)
    except T1ForgeError:
        report.rejection_reason = "analysis_error"
        return report

    report.t1_global, report.t1_global_sd = regions["global"]
    report.t1_lvivs, report.t1_lvivs_sd = regions["lvivs"]
    report.t1_lvfw, report.t1_lvfw_sd = regions["lvfw"]
    report.t1_blood_lv, report.t1_blood_rv = lv_t1, rv_t1
    report.t1_blood, report.r1_blood = blood_t1, r1
    for region in ("globalLV", "LVIVS", "LVFW"):
        try:
            _, sd = t1_sampling_distribution(image, samples, region)
            report.sampling_sd[region] = sd
        except T1ForgeError:
            report.sampling_sd[region] = None
    report.accepted = True
    return report


@dataclass
class AnalyzeResult:
    reports: list[T1Report]
    blood_model: BloodModel | None
    qc_threshold: float
    summary: dict = field(default_factory=dict)

    @property
    def n_accepted(self) -> int:
        return sum(r.accepted for r in self.reports)


def run_analyze(cfg: PipelineConfig, log=None) -> AnalyzeResult:
    cfg.validate()

    def say(msg: str) -> None:
        if log is not None:
            log.write(f"{datetime.datetime.now().isoformat()} {msg}\n")

    if cfg.qc_model:
        threshold, classifier = qc.load_model(cfg.qc_model)
        say(f"loaded QC model {cfg.qc_model}")
    else:
        records = benchmark.records_from_csv(cfg.qc_calibration)
        threshold, classifier, metrics = benchmark.fit_qc(records, seed=cfg.seed)
        say(f"calibrated QC from {cfg.qc_calibration}: {metrics}")

    jobs = [(subject, cfg.seed ^ index) for index, subject in enumerate(cfg.subjects)]
    workers = cfg.effective_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(
                lambda job: process_subject(job[0], job[1], cfg.t, threshold, classifier),
                jobs))
    else:
        reports = [process_subject(s, seed, cfg.t, threshold, classifier)
                   for s, seed in jobs]
    reports.sort(key=lambda r: r.subject_id)
    say(f"processed {len(reports)} subjects, {sum(r.accepted for r in reports)} accepted")

    model = None
    accepted = [r for r in reports if r.accepted]
    if cfg.blood_model:
        model = BloodModel.load(cfg.blood_model)
    elif cfg.fit_blood_from_cohort:
        try:
            model = fit_blood_model([r.t1_global for r in accepted],
                                    [r.r1_blood for r in accepted])
        except (TooFewSubjects, ConstantPredictor) as e:
            say(f"blood model not fitted: {e}")
    if model is not None:
        for r in accepted:
            r.t1_global_corrected = correct_t1(r.t1_global, r.r1_blood, model)
            r.t1_lvivs_corrected = correct_t1(r.t1_lvivs, r.r1_blood, model)
            r.t1_lvfw_corrected = correct_t1(r.t1_lvfw, r.r1_blood, model)

    result = AnalyzeResult(reports=reports, blood_model=model, qc_threshold=threshold)
    result.summary = _summarise(result)
    return result


COHORT_COLUMNS = ("subject_id", "group", "accepted", "t1_global", "t1_ivs", "t1_fw",
                  "t1_blood", "r1", "t1_global_corr", "t1_ivs_corr", "t1_fw_corr",
                  "t1_sd_sampling")


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def cohort_rows(reports: list[T1Report]) -> list[list[str]]:
    rows = []
    for r in sorted(reports, key=lambda r: r.subject_id):
        rows.append([r.subject_id, r.group, "true" if r.accepted else "false",
                     _fmt(r.t1_global), _fmt(r.t1_lvivs), _fmt(r.t1_lvfw),
                     _fmt(r.t1_blood), _fmt(r.r1_blood),
                     _fmt(r.t1_global_corrected), _fmt(r.t1_lvivs_corrected),
                     _fmt(r.t1_lvfw_corrected), _fmt(r.sampling_sd.get("globalLV"))])
    return rows


def write_cohort_csv(path: str | Path, reports: list[T1Report]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(COHORT_COLUMNS)
        writer.writerows(cohort_rows(reports))


def _filtered_range(values: list[float]) -> dict | None:
    if len(values) < 2:
        return None
    vals = stats.remove_outliers(values) if len(values) >= 4 else list(values)
    if len(vals) < 2:
        return None
    rr = stats.reference_range(vals)
    return {"mean": rr.mean, "lower": rr.lower, "upper": rr.upper, "n": rr.n}


def _summarise(result: AnalyzeResult) -> dict:
    reports = result.reports
    accepted = [r for r in reports if r.accepted]
    groups: dict[str, list[T1Report]] = {}
    for r in accepted:
        groups.setdefault(r.group, []).append(r)

    metric_fields = {
        "t1_global": "t1_global", "t1_lvivs": "t1_lvivs", "t1_lvfw": "t1_lvfw",
        "t1_global_corrected": "t1_global_corrected",
        "t1_lvivs_corrected": "t1_lvivs_corrected",
        "t1_lvfw_corrected": "t1_lvfw_corrected",
    }
    group_summary = {}
    for name, members in sorted(groups.items()):
        entry = {"n": len(members)}
        for key, attr in metric_fields.items():
            vals = [getattr(r, attr) for r in members if getattr(r, attr) is not None]
            entry[key] = _filtered_range(vals)
        group_summary[name] = entry

    zscores = {}
    healthy = groups.get("healthy", [])
    h_vals = [r.t1_global for r in healthy]
    h_corr = [r.t1_global_corrected for r in healthy if r.t1_global_corrected is not None]
    if len(h_vals) >= 2:
        h_mean, h_sd = float(np.mean(h_vals)), float(np.std(h_vals, ddof=1))
        hc_mean = float(np.mean(h_corr)) if len(h_corr) >= 2 else None
        hc_sd = float(np.std(h_corr, ddof=1)) if len(h_corr) >= 2 else None
        for name, members in sorted(groups.items()):
            if name == "healthy":
                continue
            entry = {}
            if h_sd > 0:
                entry["uncorrected_mean_z"] = float(np.mean(
                    [stats.zscore(r.t1_global, h_mean, h_sd) for r in members]))
            corr = [r.t1_global_corrected for r in members
                    if r.t1_global_corrected is not None]
            if corr and hc_sd:
                entry["corrected_mean_z"] = float(np.mean(
                    [stats.zscore(v, hc_mean, hc_sd) for v in corr]))
            if entry:
                zscores[name] = entry

    blood = None
    if result.blood_model is not None:
        m = result.blood_model
        blood = {"alpha": m.alpha, "intercept": m.intercept, "r2": m.r2,
                 "mse": m.mse, "r_mean": m.r_mean, "units": m.units}
    return {
        "schema_version": 1,
        "n_subjects": len(reports),
        "n_accepted": len(accepted),
        "n_rejected": len(reports) - len(accepted),
        "qc_threshold": result.qc_threshold,
        "rejections": {r.subject_id: r.rejection_reason
                       for r in reports if not r.accepted},
        "blood_model": blood,
        "groups": group_summary,
        "zscores_vs_healthy": zscores,
    }


def write_outputs(result: AnalyzeResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    for r in result.reports:
        r.save(out / "reports" / f"{r.subject_id}.json")
    write_cohort_csv(out / "cohort.csv", result.reports)
    (out / "summary.json").write_text(
        json.dumps(result.summary, sort_keys=True, indent=2) + "\n")
    if result.blood_model is not None:
        result.blood_model.save(out / "blood_model.json")
