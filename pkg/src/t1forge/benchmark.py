"""Phantom-derived QC benchmark: labelled (features, evidence) datasets for
calibrating and evaluating the two-step gate without clinical data.

Clean subjects run through the Monte-Carlo segmenter. Corruptions that damage
the image (wrong plane, ghosting) are segmented too; mask failures keep the
clean image and wrap the broken mask as a jittered sample set, whose evidence
is the mask's own homogeneity cost on the image.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import phantom, qc, segmenter, uncertainty
from .errors import DegenerateImage, NoFit, OneClassOnly

MODES = ("wrong_plane", "motion_ghosting", "mask_failure")


@dataclass
class QCRecord:
    subject: str
    label_correct: bool
    mode: str                      # "clean" or a corruption mode
    severity: float
    evidence: float                # inf when the backend refused to fit
    features: np.ndarray | None    # None when no features could be extracted


def _features_for(image, sample_set) -> np.ndarray:
    prob = uncertainty.mean_probability(sample_set)
    mask = uncertainty.final_mask(prob)
    umap = uncertainty.uncertainty_map(prob, sample_set)
    return qc.extract_features(mask, umap, sample_set.evidence)


def build_qc_dataset(n_clean: int, n_corrupt: int, seed: int = 0, *,
                     t: int = 12, noise_sd: float = 30.0,
                     base_spec: phantom.PhantomSpec | None = None,
                     starts: int = 4) -> list[QCRecord]:
    """Seeded benchmark of clean and corrupted phantoms with QC features."""
    rng = np.random.default_rng(seed)
    base = base_spec or phantom.PhantomSpec(noise_sd=noise_sd)
    records = []

    def make_spec(i: int) -> phantom.PhantomSpec:
        return replace(base,
                       seed=seed * 100003 + i,
                       t1_myocardium=float(rng.uniform(870.0, 1010.0)),
                       rv_angle_deg=float(rng.uniform(0.0, 360.0)))

    for i in range(n_clean):
        truth = phantom.generate(make_spec(i))
        rec = QCRecord(subject=f"clean{i:04d}", label_correct=True,
                       mode="clean", severity=0.0, evidence=math.inf, features=None)
        try:
            ss = segmenter.segment_mc(truth.image, t=t, seed=seed + i, starts=starts)
            rec.evidence = ss.evidence
            rec.features = _features_for(truth.image, ss)
        except (NoFit, DegenerateImage):
            pass
        records.append(rec)

    for i in range(n_corrupt):
        mode = MODES[i % len(MODES)]
        severity = float(rng.uniform(0.5, 1.0))
        truth = phantom.generate(make_spec(n_clean + i))
        img, mask = phantom.corrupt(truth, mode, severity, seed=seed + 7_000_000 + i)
        rec = QCRecord(subject=f"bad{i:04d}", label_correct=False,
                       mode=mode, severity=severity, evidence=math.inf, features=None)
        try:
            if mode == "mask_failure":
                ss = segmenter.samples_from_mask(img, mask, t=t, seed=seed + i)
            else:
                ss = segmenter.segment_mc(img, t=t, seed=seed + i, starts=starts)
            rec.evidence = ss.evidence
            rec.features = _features_for(img, ss)
        except (NoFit, DegenerateImage):
            pass
        records.append(rec)
    return records


def records_to_csv(records: list[QCRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subject", "label", "mode", "severity", *qc.FEATURE_NAMES])
        for r in records:
            feats = ([""] * (qc.N_FEATURES - 1) + [repr(r.evidence)] if r.features is None
                     else [repr(float(v)) for v in r.features])
            writer.writerow([r.subject, int(r.label_correct), r.mode,
                             repr(r.severity), *feats])


def records_from_csv(path: str | Path) -> list[QCRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = [c for c in ("subject", "label", *qc.FEATURE_NAMES)
                   if reader.fieldnames is None or c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: dataset missing columns {missing}")
        for row in reader:
            if row[qc.FEATURE_NAMES[0]] == "":
                feats = None
                evidence = float(row["evidence"])
            else:
                feats = np.array([float(row[name]) for name in qc.FEATURE_NAMES])
                evidence = float(feats[-1])
            records.append(QCRecord(subject=row["subject"],
                                    label_correct=bool(int(row["label"])),
                                    mode=row.get("mode", ""),
                                    severity=float(row.get("severity") or 0.0),
                                    evidence=evidence, features=feats))
    return records


def decide(record: QCRecord, threshold: float, classifier: qc.QCClassifier) -> qc.QCDecision:
    """Gate one record; featureless (unfittable) records are hard rejects."""
    if record.features is None:
        return qc.QCDecision(step1_score=record.evidence, step1_threshold=threshold,
                             step1_pass=False, step2_probability=0.0, step2_pass=False,
                             overall_accept=False)
    return qc.run_qc(record.evidence, threshold, classifier, record.features)


def fit_qc(records: list[QCRecord], seed: int = 0, split: float = 0.5,
           config: qc.TrainConfig | None = None) -> tuple[float, qc.QCClassifier, dict]:
    """Calibrate the threshold and train the classifier on a shuffled split;
    report held-out sensitivity/specificity/balanced accuracy."""
    if not records:
        raise OneClassOnly("empty dataset")
    idx = np.random.default_rng(seed).permutation(len(records))
    n_train = max(1, int(round(split * len(records))))
    train = [records[i] for i in idx[:n_train]]
    held = [records[i] for i in idx[n_train:]] or train

    threshold = qc.calibrate_threshold([r.evidence for r in train],
                                       [r.label_correct for r in train])
    with_feats = [r for r in train if r.features is not None]
    classifier = qc.train_classifier(np.array([r.features for r in with_feats]),
                                     [r.label_correct for r in with_feats],
                                     config, seed=seed)
    decisions = [decide(r, threshold, classifier) for r in held]
    sens, spec, ba = qc.qc_metrics(decisions, [r.label_correct for r in held])
    metrics = {"sensitivity": sens, "specificity": spec, "balanced_accuracy": ba,
               "n_train": len(train), "n_holdout": len(held)}
    return threshold, classifier, metrics
