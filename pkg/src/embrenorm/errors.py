"""Exception types shared across the package.

Every rejected input maps to one of these so callers can distinguish
"you gave me garbage" (ValueError family) from "the file on disk is
malformed" (StoreError family) without string matching.
"""


class DimensionMismatch(ValueError):
    """Operands disagree on embedding dimensionality."""


class NotUnit(ValueError):
    """A vector flagged as normalized is not unit length within tolerance."""


class DegenerateResidual(ValueError):
    """Residual after bias removal is too small to renormalize."""


class ZeroBias(ValueError):
    """Directional renormalization requested with a near-zero bias vector."""


class NonFinite(ValueError):
    """NaN or infinity encountered where finite values are required."""


class EmptyAccumulator(ValueError):
    """finalize() called before any vector was absorbed."""


class EmptyTrainSet(ValueError):
    """Classification requested with no training rows."""


class DegenerateInput(ValueError):
    """Metric undefined for the given input (e.g. constant list)."""


class KTooLarge(ValueError):
    """More clusters or neighbors requested than there are items."""


class NoPositives(ValueError):
    """Average precision requested with no positive labels."""


class UnsupportedMetric(ValueError):
    """No uncertainty model is defined for the named metric."""


class KeyMismatch(ValueError):
    """Record lists to compare are not keyed by the same task ids."""


class LeakageDetected(RuntimeError):
    """Bias estimate was computed on the evaluation data itself."""


class RejectionBudgetExceeded(RuntimeError):
    """Rejection sampling failed to satisfy a constraint within budget."""


class InvalidEncoding(ValueError):
    """Input bytes are not valid UTF-8."""


class StoreError(Exception):
    """Base class for malformed on-disk artifacts. Readers never repair."""


class BadMagic(StoreError):
    """File does not start with the expected magic bytes."""


class BadHeader(StoreError):
    """Header fields are structurally invalid (e.g. dim = 0)."""


class VersionUnsupported(StoreError):
    """Format version is not one this reader understands."""


class TruncatedPayload(StoreError):
    """Payload length does not match the header."""


class IdRowMismatch(StoreError):
    """Id sidecar does not cover the payload rows exactly once."""


class NormMismatch(StoreError):
    """Stored norm disagrees with the stored vector."""


class SchemaError(StoreError):
    """JSON artifact is missing required fields or has wrong types."""
