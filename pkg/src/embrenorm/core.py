"""Embedding containers and bias-removal kernels.

Embeddings are stored as 32-bit floats; every reduction (dot products,
norms) runs in 64-bit and results are cast back to 32-bit at the edge.
The matrix kernels and the single-vector wrappers share one code path,
so applying a method to a matrix gives bit-for-bit the same rows as
applying it vector by vector.

Two removal methods are implemented on top of a shared bias estimate:

* R1 subtracts the full mean vector and renormalizes.
* R2 removes only the projection onto the mean direction and
  renormalizes.  R2 is invariant to the scale of the bias and
  idempotent: re-applying it to its own output is a no-op.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    DegenerateResidual,
    DimensionMismatch,
    NonFinite,
    NotUnit,
    ZeroBias,
)

# Norms this close to zero cannot be renormalized meaningfully.
DEGENERATE_NORM = 1e-9
# Tolerance for the "input is unit length" precondition.
UNIT_INPUT_TOL = 1e-3
# Postcondition tolerance on output unit length and orthogonality.
OUTPUT_TOL = 1e-6


class RenormMethod(Enum):
    IDENTITY = "identity"
    R1 = "r1"
    R2 = "r2"


class DegeneratePolicy(Enum):
    DROP = "drop"
    KEEP_RAW = "keep-raw"
    FAIL = "fail"


def is_hex_fingerprint(s: str) -> bool:
    return isinstance(s, str) and len(s) == 64 and all(c in "0123456789abcdef" for c in s)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable batch of embeddings with stable string ids.

    Args:
        rows: (count, dim) array, stored as float32.
        ids: one unique id per row.
        normalized: when True every row must be unit length within 1e-3.
    """

    rows: np.ndarray
    ids: tuple[str, ...]
    normalized: bool = True

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise DimensionMismatch(f"expected 2-d rows, got shape {rows.shape}")
        if rows.shape[1] < 2:
            raise DimensionMismatch(f"dim must be >= 2, got {rows.shape[1]}")
        if not np.all(np.isfinite(rows)):
            raise NonFinite("matrix contains NaN or infinity")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != rows.shape[0]:
            raise DimensionMismatch(f"{len(ids)} ids for {rows.shape[0]} rows")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in matrix")
        if self.normalized and rows.shape[0] > 0:
            norms = np.sqrt((rows.astype(np.float64) ** 2).sum(axis=1))
            worst = np.abs(norms - 1.0).max()
            if worst > UNIT_INPUT_TOL:
                raise NotUnit(f"rows flagged normalized deviate from unit by {worst:.3g}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "ids", ids)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def row_index(self) -> dict[str, int]:
        return {id_: i for i, id_ in enumerate(self.ids)}


@dataclass(frozen=True)
class BiasEstimate:
    """Mean-bias vector with provenance.

    norm and mu_hat are derived in the constructor; mu_hat is the zero
    vector when the mean is degenerate (norm <= 1e-9).
    """

    mu: np.ndarray
    sample_count: int
    corpus_fingerprint: str
    model_id: str
    norm: float = field(init=False)
    mu_hat: np.ndarray = field(init=False)

    def __post_init__(self):
        mu = np.ascontiguousarray(self.mu, dtype=np.float64)
        if mu.ndim != 1 or mu.shape[0] < 2:
            raise DimensionMismatch(f"mu must be 1-d with dim >= 2, got shape {mu.shape}")
        if not np.all(np.isfinite(mu)):
            raise NonFinite("bias vector contains NaN or infinity")
        if self.sample_count < 1:
            raise ValueError(f"sample_count must be >= 1, got {self.sample_count}")
        if not is_hex_fingerprint(self.corpus_fingerprint):
            raise ValueError("corpus_fingerprint must be 64 lowercase hex digits")
        norm = float(np.sqrt((mu * mu).sum()))
        mu_hat = mu / norm if norm > DEGENERATE_NORM else np.zeros_like(mu)
        mu.setflags(write=False)
        mu_hat.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "norm", norm)
        object.__setattr__(self, "mu_hat", mu_hat)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def matrix_fingerprint(matrix: EmbeddingMatrix) -> str:
    """Order-independent content hash of (id, row) pairs, 64 hex digits.

    Permuting rows does not change the fingerprint; changing any id or
    any stored float32 byte does.
    """
    row_digests = sorted(
        hashlib.sha256(matrix.ids[i].encode("utf-8") + b"\x00" + matrix.rows[i].tobytes()).digest()
        for i in range(matrix.count)
    )
    h = hashlib.sha256()
    h.update(b"EMBMAT")
    for d in row_digests:
        h.update(d)
    return h.hexdigest()


def _r1_kernel(rows64: np.ndarray, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Subtract mu from each row and renormalize. Returns (out, degenerate)."""
    resid = rows64 - mu
    rnorm = np.sqrt((resid * resid).sum(axis=1))
    degenerate = rnorm <= DEGENERATE_NORM
    out = resid / np.where(degenerate, 1.0, rnorm)[:, None]
    return out, degenerate


def _r2_kernel(rows64: np.ndarray, mu_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Remove the mu_hat component of each row and renormalize.

    Rows that already satisfy the R2 postconditions (orthogonal to
    mu_hat within 1e-6 and unit within 1e-6) pass through unchanged.
    That makes repeated application a no-op at the byte level instead
    of churning last-place bits.
    """
    proj = (rows64 * mu_hat).sum(axis=1)
    resid = rows64 - proj[:, None] * mu_hat
    rnorm = np.sqrt((resid * resid).sum(axis=1))
    degenerate = rnorm <= DEGENERATE_NORM
    out = resid / np.where(degenerate, 1.0, rnorm)[:, None]
    in_norm = np.sqrt((rows64 * rows64).sum(axis=1))
    settled = (np.abs(proj) <= OUTPUT_TOL) & (np.abs(in_norm - 1.0) <= OUTPUT_TOL) & ~degenerate
    if settled.any():
        out[settled] = rows64[settled]
    return out, degenerate


def _check_vector(e: np.ndarray, bias: BiasEstimate) -> np.ndarray:
    e32 = np.ascontiguousarray(e, dtype=np.float32)
    if e32.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {e32.shape}")
    if e32.shape[0] != bias.dim:
        raise DimensionMismatch(f"vector dim {e32.shape[0]} vs bias dim {bias.dim}")
    if not np.all(np.isfinite(e32)):
        raise NonFinite("vector contains NaN or infinity")
    norm = float(np.sqrt((e32.astype(np.float64) ** 2).sum()))
    if abs(norm - 1.0) > UNIT_INPUT_TOL:
        raise NotUnit(f"input norm {norm:.6f} not unit within {UNIT_INPUT_TOL}")
    return e32


def renormalize_r1(e: np.ndarray, bias: BiasEstimate) -> np.ndarray:
    """Full mean removal: (e - mu) / ||e - mu||.

    A zero bias is a no-op (there is nothing to subtract).  Raises
    DegenerateResidual when e is within 1e-9 of mu.
    """
    e32 = _check_vector(e, bias)
    if bias.norm <= DEGENERATE_NORM:
        return e32
    out, degenerate = _r1_kernel(e32[None, :].astype(np.float64), bias.mu)
    if degenerate[0]:
        raise DegenerateResidual("embedding coincides with the bias mean")
    return out[0].astype(np.float32)


def renormalize_r2(e: np.ndarray, bias: BiasEstimate) -> np.ndarray:
    """Directional removal: strip the component along mu_hat and renormalize.

    Raises ZeroBias when the bias has no direction, DegenerateResidual
    when e is parallel to mu_hat.
    """
    e32 = _check_vector(e, bias)
    if bias.norm <= DEGENERATE_NORM:
        raise ZeroBias("cannot remove direction of a zero bias")
    out, degenerate = _r2_kernel(e32[None, :].astype(np.float64), bias.mu_hat)
    if degenerate[0]:
        raise DegenerateResidual("embedding is parallel to the bias direction")
    return out[0].astype(np.float32)


def apply_matrix(
    matrix: EmbeddingMatrix,
    bias: BiasEstimate,
    method: RenormMethod,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
) -> tuple[EmbeddingMatrix, list[str]]:
    """Apply a removal method to every row.

    Returns the transformed matrix and the ids of dropped rows
    (non-empty only under the DROP policy).  Row i of the result is
    bit-for-bit what the single-vector function returns for row i.
    """
    if matrix.dim != bias.dim:
        raise DimensionMismatch(f"matrix dim {matrix.dim} vs bias dim {bias.dim}")
    if method is RenormMethod.IDENTITY:
        return matrix, []
    if method is RenormMethod.R1:
        if bias.norm <= DEGENERATE_NORM:
            return matrix, []
        out64, degenerate = _r1_kernel(matrix.rows.astype(np.float64), bias.mu)
    elif method is RenormMethod.R2:
        if bias.norm <= DEGENERATE_NORM:
            raise ZeroBias("cannot remove direction of a zero bias")
        out64, degenerate = _r2_kernel(matrix.rows.astype(np.float64), bias.mu_hat)
    else:
        raise ValueError(f"unknown method {method}")

    out = out64.astype(np.float32)
    if not degenerate.any():
        return EmbeddingMatrix(out, matrix.ids, normalized=True), []

    bad_ids = [matrix.ids[i] for i in np.flatnonzero(degenerate)]
    if policy is DegeneratePolicy.FAIL:
        raise DegenerateResidual(f"degenerate rows under {method.value}: {bad_ids}")
    if policy is DegeneratePolicy.KEEP_RAW:
        out[degenerate] = matrix.rows[degenerate]
        return EmbeddingMatrix(out, matrix.ids, normalized=matrix.normalized), []
    keep = ~degenerate
    kept_ids = [matrix.ids[i] for i in np.flatnonzero(keep)]
    return EmbeddingMatrix(out[keep], kept_ids, normalized=True), bad_ids
