"""Two-step quality control.

Step 1 rejects on the backend evidence score (badness above a calibrated
threshold). Step 2 is an accurate/inaccurate classifier over nine features of
the (segmentation, uncertainty map, evidence) triple; it stands in for the
paper-scale image classifier while keeping the gate logic intact. A case is
accepted only when both steps pass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, NonFiniteFeature, OneClassOnly
from .imaging import LVBP, LVMYO, LabelMask, connected_components, dilate, erode
from .uncertainty import LN2

FEATURE_NAMES = (
    "myo_mean_uncertainty",
    "myo_max_uncertainty",
    "boundary_band_uncertainty",
    "high_uncertainty_fraction",
    "myo_component_count",
    "lvbp_component_count",
    "myo_area_fraction",
    "ring_closure",
    "evidence",
)
N_FEATURES = len(FEATURE_NAMES)

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class QCDecision:
    step1_score: float
    step1_threshold: float
    step1_pass: bool
    step2_probability: float
    step2_pass: bool
    overall_accept: bool

    def __post_init__(self):
        if self.overall_accept and not (self.step1_pass and self.step2_pass):
            raise ValueError("accept requires both steps to pass")


@dataclass
class TrainConfig:
    iterations: int = 800
    learning_rate: float = 0.25


@dataclass
class QCClassifier:
    """Logistic accurate/inaccurate model over standardised QC features."""

    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_sds: np.ndarray           # constant features get sd 1 and weight 0
    dropped: tuple[int, ...] = ()
    seed: int = 0
    iterations: int = 0
    learning_rate: float = 0.0
    loss_history: list = field(default_factory=list, repr=False)

    def predict_proba(self, features: np.ndarray) -> float:
        x = (np.asarray(features, dtype=np.float64) - self.feature_means) / self.feature_sds
        z = float(x @ self.weights + self.bias)
        return 1.0 / (1.0 + math.exp(-z))


def extract_features(mask: LabelMask, umap: np.ndarray, evidence: float) -> np.ndarray:
    """Nine-feature summary of a segmentation + uncertainty pair.

    Empty-myocardium masks produce the sentinel pattern: zero uncertainty
    stats, zero areas/components, ring closure 0.
    """
    u = np.asarray(umap, dtype=np.float64)
    if u.shape != mask.labels.shape:
        raise DimensionMismatch(f"umap {u.shape} vs mask {mask.labels.shape}")
    myo = mask.region(LVMYO)
    lvbp = mask.region(LVBP)
    f = np.zeros(N_FEATURES, dtype=np.float64)
    if myo.any():
        f[0] = u[myo].mean()
        f[1] = u[myo].max()
        boundary = myo & ~erode(myo)
        band = dilate(boundary, iterations=3)
        f[2] = u[band].mean() if band.any() else 0.0
        f[4] = connected_components(myo)[0]
        f[6] = myo.sum() / myo.size
    f[3] = (u > LN2).mean()
    if lvbp.any():
        f[5] = connected_components(lvbp)[0]
    f[7] = 1.0 if _ring_closed(mask) else 0.0
    f[8] = evidence
    return f


def _ring_closed(mask: LabelMask) -> bool:
    """True when the LV blood pool cannot reach the border without crossing
    myocardium (4-connected flood from the border over non-myocardium)."""
    myo = mask.region(LVMYO)
    lvbp = mask.region(LVBP)
    if not myo.any() or not lvbp.any():
        return False
    free = ~myo
    seed = np.zeros_like(free)
    seed[0, :] = seed[-1, :] = True
    seed[:, 0] = seed[:, -1] = True
    seed &= free
    reach = ndimage.binary_propagation(seed, structure=_FOUR_CONN, mask=free)
    return not (reach & lvbp).any()


def calibrate_threshold(scores, labels_correct) -> float:
    """Pick the reject-if-score-above threshold maximising balanced accuracy.

    Candidates are midpoints of consecutive distinct scores (the score itself
    when there is only one); ties resolve to the smaller, stricter threshold.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels_correct, dtype=bool)
    if s.shape != y.shape:
        raise DimensionMismatch(f"{s.size} scores vs {y.size} labels")
    if y.all() or not y.any():
        raise OneClassOnly("need both correct and incorrect examples")
    distinct = np.unique(s)
    if distinct.size == 1:
        candidates = distinct
    else:
        candidates = (distinct[:-1] + distinct[1:]) / 2.0
    best_thr = candidates[0]
    best_ba = -1.0
    for thr in candidates:
        rejected = s > thr
        sens = float(rejected[~y].mean())        # incorrect caught
        spec = float((~rejected)[y].mean())      # correct kept
        ba = 0.5 * (sens + spec)
        if ba > best_ba:                         # strict: first (smallest) wins ties
            best_ba = ba
            best_thr = thr
    return float(best_thr)


def train_classifier(features, labels_correct, config: TrainConfig | None = None,
                     seed: int = 0) -> QCClassifier:
    """Full-batch gradient descent on the mean logistic loss.

    Features are standardised with the training set's mean and population SD;
    zero-variance columns are dropped (weight pinned at 0) and recorded.
    """
    cfg = config or TrainConfig()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels_correct, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"features {x.shape} vs labels {y.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteFeature("features contain non-finite values")
    if y.all() or not y.any():
        raise OneClassOnly("need both correct and incorrect examples")

    means = x.mean(axis=0)
    sds = x.std(axis=0)                          # ddof=0: invariant under duplication
    dropped = tuple(int(i) for i in np.flatnonzero(sds == 0.0))
    sds = np.where(sds == 0.0, 1.0, sds)
    xs = (x - means) / sds

    n, d = xs.shape
    w = np.zeros(d)
    b = 0.0
    losses = []
    for _ in range(cfg.iterations):
        z = xs @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        losses.append(float(np.mean(np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0) - y * z)))
        g = p - y
        w = w - cfg.learning_rate * (xs.T @ g) / n
        b = b - cfg.learning_rate * float(g.mean())
    return QCClassifier(weights=w, bias=b, feature_means=means, feature_sds=sds,
                        dropped=dropped, seed=seed, iterations=cfg.iterations,
                        learning_rate=cfg.learning_rate, loss_history=losses)


def run_qc(evidence: float, threshold: float, classifier: QCClassifier,
           features: np.ndarray) -> QCDecision:
    """Apply both gates. Step 1 passes at equality (only scores strictly
    above the threshold reject); step 2 cuts the accurate-probability at 0.5."""
    step1 = evidence <= threshold
    prob = classifier.predict_proba(features)
    step2 = prob >= 0.5
    return QCDecision(step1_score=evidence, step1_threshold=threshold, step1_pass=step1,
                      step2_probability=prob, step2_pass=step2,
                      overall_accept=step1 and step2)


def qc_metrics(decisions, labels_correct) -> tuple[float, float, float]:
    """(sensitivity, specificity, balanced accuracy) with `incorrect` as the
    positive class: sensitivity = rejected incorrect / incorrect."""
    y = np.asarray(labels_correct, dtype=bool)
    accepted = np.asarray([d.overall_accept for d in decisions], dtype=bool)
    if accepted.shape != y.shape:
        raise DimensionMismatch(f"{accepted.size} decisions vs {y.size} labels")
    if y.all() or not y.any():
        raise OneClassOnly("need both correct and incorrect examples")
    sens = float((~accepted)[~y].mean())
    spec = float(accepted[y].mean())
    return sens, spec, 0.5 * (sens + spec)


# ---------------------------------------------------------------------------
# persistence: classifier + threshold in one JSON model file

MODEL_VERSION = 1


def save_model(path: str | Path, threshold: float, classifier: QCClassifier) -> None:
    doc = {
        "version": MODEL_VERSION,
        "threshold": threshold,
        "weights": [float(v) for v in classifier.weights],
        "bias": float(classifier.bias),
        "feature_means": [float(v) for v in classifier.feature_means],
        "feature_sds": [float(v) for v in classifier.feature_sds],
        "seed": classifier.seed,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_model(path: str | Path) -> tuple[float, QCClassifier]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    clf = QCClassifier(weights=np.asarray(doc["weights"], dtype=np.float64),
                       bias=float(doc["bias"]),
                       feature_means=np.asarray(doc["feature_means"], dtype=np.float64),
                       feature_sds=np.asarray(doc["feature_sds"], dtype=np.float64),
                       seed=int(doc.get("seed", 0)))
    return float(doc["threshold"]), clf
