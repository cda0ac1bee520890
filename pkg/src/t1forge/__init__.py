"""Automated native-T1 myocardial tissue characterisation.

Pipeline stages: probabilistic segmentation (built-in shape-model backend or
externally produced sample stacks), cross-entropy uncertainty maps, a
two-step quality-control gate, anatomy partitioning, blood-corrected T1
quantification, and cohort statistics — all verifiable against a synthetic
phantom generator.
"""

__version__ = "0.1.0"

from .imaging import BG, LVBP, LVMYO, RVBP, ImageGrid, LabelMask, StructuringElement
from .phantom import PhantomSpec, PhantomTruth, corrupt, generate
from .segmenter import SegmentationSampleSet, load_samples, segment_mc, write_samples
from .uncertainty import final_mask, mean_probability, t1_sampling_distribution, uncertainty_map
from .qc import QCClassifier, QCDecision, calibrate_threshold, extract_features, qc_metrics, run_qc, train_classifier
from .anatomy import AnatomyPartition, blood_roi, insertion_points, partition_myocardium
from .analysis import BloodModel, T1Report, blood_r1, correct_t1, fit_blood_model, regional_t1

__all__ = [
    "BG", "LVBP", "LVMYO", "RVBP",
    "ImageGrid", "LabelMask", "StructuringElement",
    "PhantomSpec", "PhantomTruth", "generate", "corrupt",
    "SegmentationSampleSet", "segment_mc", "load_samples", "write_samples",
    "mean_probability", "final_mask", "uncertainty_map", "t1_sampling_distribution",
    "QCClassifier", "QCDecision", "calibrate_threshold", "extract_features",
    "train_classifier", "run_qc", "qc_metrics",
    "AnatomyPartition", "insertion_points", "partition_myocardium", "blood_roi",
    "BloodModel", "T1Report", "regional_t1", "blood_r1", "fit_blood_model", "correct_t1",
]
