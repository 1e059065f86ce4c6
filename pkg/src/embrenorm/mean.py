"""Streaming mean estimation.

The corpus mean is a plain running sum in float64.  Sub-accumulators
for different shards can be merged, and merging is associative to
well under the tolerances the tests assert (1e-12 sequential, 1e-7
for arbitrary merge trees), so sharded estimation gives the same
bias as a single pass.
"""

from __future__ import annotations

import numpy as np

from .core import BiasEstimate, EmbeddingMatrix
from .errors import DimensionMismatch, EmptyAccumulator, NonFinite


class MeanAccumulator:
    """Accumulates vectors for a mean estimate.

    Tracks the running sum, the count, and the largest input norm seen
    (the mean of vectors can never be longer than the longest input;
    finalize asserts that as a sanity check).
    """

    def __init__(self, dim: int):
        if dim < 2:
            raise DimensionMismatch(f"dim must be >= 2, got {dim}")
        self.dim = int(dim)
        self.running_sum = np.zeros(self.dim, dtype=np.float64)
        self.count = 0
        self.max_input_norm = 0.0

    def absorb(self, vec: np.ndarray) -> None:
        v = np.asarray(vec, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.dim:
            raise DimensionMismatch(f"expected vector of dim {self.dim}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFinite("cannot absorb NaN or infinity")
        self.running_sum += v
        self.count += 1
        self.max_input_norm = max(self.max_input_norm, float(np.sqrt((v * v).sum())))

    def absorb_matrix(self, matrix: EmbeddingMatrix) -> None:
        """Absorb every row of a matrix in one shot."""
        if matrix.dim != self.dim:
            raise DimensionMismatch(f"matrix dim {matrix.dim} vs accumulator dim {self.dim}")
        if matrix.count == 0:
            return
        rows64 = matrix.rows.astype(np.float64)
        self.running_sum += rows64.sum(axis=0)
        self.count += matrix.count
        norms = np.sqrt((rows64 * rows64).sum(axis=1))
        self.max_input_norm = max(self.max_input_norm, float(norms.max()))

    def merge(self, other: "MeanAccumulator") -> "MeanAccumulator":
        """Combine two shard accumulators into a new one."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"cannot merge dim {other.dim} into dim {self.dim}")
        merged = MeanAccumulator(self.dim)
        merged.running_sum = self.running_sum + other.running_sum
        merged.count = self.count + other.count
        merged.max_input_norm = max(self.max_input_norm, other.max_input_norm)
        return merged

    def finalize(self, corpus_fingerprint: str, model_id: str) -> BiasEstimate:
        """Close out the estimate.  Raises EmptyAccumulator on count 0."""
        if self.count == 0:
            raise EmptyAccumulator("no vectors absorbed")
        mu = self.running_sum / self.count
        norm = float(np.sqrt((mu * mu).sum()))
        if norm > self.max_input_norm + 1e-9:
            raise AssertionError(
                f"mean norm {norm} exceeds largest input norm {self.max_input_norm}"
            )
        # norm <= 1e-9 is legal: BiasEstimate records a zero direction.
        assert norm >= 0.0
        return BiasEstimate(
            mu=mu,
            sample_count=self.count,
            corpus_fingerprint=corpus_fingerprint,
            model_id=model_id,
        )


def estimate_bias(matrix: EmbeddingMatrix, corpus_fingerprint: str, model_id: str) -> BiasEstimate:
    """One-call mean estimate over a whole matrix."""
    acc = MeanAccumulator(matrix.dim)
    acc.absorb_matrix(matrix)
    return acc.finalize(corpus_fingerprint, model_id)
