"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
the batch pipeline can map exceptions to machine-readable rejection reasons.
"""


class T1ForgeError(Exception):
    """Base class for all package errors."""


# --- imaging / file parsing ---

class BadMagic(T1ForgeError):
    """File is not a supported single-file NIfTI-1 (.nii) image."""


class UnsupportedDatatype(T1ForgeError):
    """NIfTI datatype code outside the supported subset."""


class TruncatedFile(T1ForgeError):
    """File ends before the declared header or voxel data."""


class GzipUnsupported(T1ForgeError):
    """Compressed (.nii.gz) streams are not handled."""


class SliceOutOfRange(T1ForgeError):
    """Requested slice index outside the volume's third dimension."""


class FormatError(T1ForgeError):
    """Malformed raw-grid or sample-stack file."""


class DimensionMismatch(T1ForgeError):
    """Grids, masks or sample planes that must share a shape do not."""


class EmptyInput(T1ForgeError):
    """Operation requires at least one foreground pixel."""


# --- phantom ---

class GeometryInfeasible(T1ForgeError):
    """Phantom regions would overlap or be empty for the given parameters."""


# --- segmenter ---

class DegenerateImage(T1ForgeError):
    """Image is constant and cannot be intensity-normalised."""


class NoFit(T1ForgeError):
    """Best model fit stayed above the hard cost cap (wrong-plane input)."""

    def __init__(self, cost: float, cap: float):
        super().__init__(f"fit cost {cost:.6g} exceeds cap {cap:.6g}")
        self.cost = cost
        self.cap = cap


# --- anatomy ---

class NoJunctions(T1ForgeError):
    """No background/myocardium/RV junction pixels found."""


class SingleCluster(T1ForgeError):
    """Junction pixels do not separate into two angular clusters."""


class DegenerateCentroid(T1ForgeError):
    """Myocardium empty; no centroid to measure angles about."""


class EmptyRegion(T1ForgeError):
    """A requested analysis region contains no pixels."""


class EmptyROI(T1ForgeError):
    """Blood-pool ROI became empty after erosion or pixel rejection."""


# --- qc / stats ---

class OneClassOnly(T1ForgeError):
    """Both correct and incorrect examples are required."""


class NonFiniteFeature(T1ForgeError):
    """Feature vectors passed to training must be finite."""


class ConstantPredictor(T1ForgeError):
    """Regression predictor has zero variance."""


class TooFewSubjects(T1ForgeError):
    """Cohort smaller than the minimum for a fit."""


class ConstantSeries(T1ForgeError):
    """Correlation undefined for a constant series."""


class LengthMismatch(T1ForgeError):
    """Paired series differ in length."""


class TooFew(T1ForgeError):
    """Sample too small for the requested statistic."""


class ZeroVariance(T1ForgeError):
    """Statistic undefined for zero spread."""


class UnitMismatch(T1ForgeError):
    """Relaxation-rate units do not match the blood model's units."""


class EmptyCohort(T1ForgeError):
    """Cohort table has no usable rows."""
