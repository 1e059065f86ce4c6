"""Renormalization kernel behavior: worked examples, edge policies,
batch/scalar agreement, and the unit/orthogonality postconditions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embrenorm.core import (
    BiasEstimate,
    DegeneratePolicy,
    EmbeddingMatrix,
    RenormMethod,
    apply_matrix,
    matrix_fingerprint,
    renormalize_r1,
    renormalize_r2,
)
from embrenorm.errors import (
    DegenerateResidual,
    DimensionMismatch,
    NonFinite,
    NotUnit,
    ZeroBias,
)
from embrenorm.rng import stream, unit_vector

FP = "0" * 64


def bias_of(vec, count=100):
    return BiasEstimate(
        mu=np.asarray(vec, dtype=np.float64),
        sample_count=count,
        corpus_fingerprint=FP,
        model_id="test",
    )


def unit32(vec):
    v = np.asarray(vec, dtype=np.float64)
    return (v / np.sqrt((v * v).sum())).astype(np.float32)


def matrix_of(rows, ids=None, normalized=True):
    rows = np.asarray(rows, dtype=np.float32)
    if ids is None:
        ids = tuple(f"row-{i}" for i in range(rows.shape[0]))
    return EmbeddingMatrix(rows=rows, ids=tuple(ids), normalized=normalized)


def test_r1_worked_example():
    # (0.6, 0.8) minus (0.2, 0) leaves (0.4, 0.8), norm sqrt(0.8)
    out = renormalize_r1(np.array([0.6, 0.8], dtype=np.float32), bias_of([0.2, 0.0]))
    assert out.dtype == np.float32
    assert np.allclose(out, [0.447214, 0.894427], atol=1e-6)
    assert abs(float((out.astype(np.float64) ** 2).sum()) - 1.0) <= 1e-6


def test_r1_zero_bias_is_identity():
    e = unit32([0.6, 0.8])
    out = renormalize_r1(e, bias_of([0.0, 0.0]))
    assert np.array_equal(out, e)


def test_r1_degenerate_when_input_equals_bias():
    with pytest.raises(DegenerateResidual):
        renormalize_r1(np.array([1.0, 0.0], dtype=np.float32), bias_of([1.0, 0.0]))


def test_r2_worked_example():
    out = renormalize_r2(np.array([0.6, 0.8], dtype=np.float32), bias_of([1.0, 0.0]))
    assert np.allclose(out, [0.0, 1.0], atol=1e-6)


def test_r2_orthogonal_input_passes_through_bitwise():
    e = np.array([0.0, 1.0], dtype=np.float32)
    out = renormalize_r2(e, bias_of([0.5, 0.0]))
    assert np.array_equal(out, e)


def test_r2_parallel_input_degenerate():
    with pytest.raises(DegenerateResidual):
        renormalize_r2(np.array([1.0, 0.0], dtype=np.float32), bias_of([0.3, 0.0]))


def test_r2_zero_bias_refused():
    with pytest.raises(ZeroBias):
        renormalize_r2(unit32([0.6, 0.8]), bias_of([0.0, 0.0]))


def test_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        renormalize_r1(unit32([1.0, 0.0, 0.0]), bias_of([0.2, 0.0]))


def test_non_unit_input_rejected():
    with pytest.raises(NotUnit):
        renormalize_r1(np.array([0.5, 0.5], dtype=np.float32), bias_of([0.2, 0.0]))


def test_non_finite_input_rejected():
    with pytest.raises(NonFinite):
        renormalize_r1(np.array([np.nan, 1.0], dtype=np.float32), bias_of([0.2, 0.0]))


def test_identity_method_returns_same_object():
    m = matrix_of([unit32([0.6, 0.8]), unit32([1.0, 1.0]), unit32([-0.3, 0.1])])
    out, dropped = apply_matrix(m, bias_of([0.2, 0.1]), RenormMethod.IDENTITY)
    assert out is m
    assert dropped == []


def test_parallel_row_dropped():
    mu = [0.3, 0.0]
    m = matrix_of([[1.0, 0.0], [0.0, 1.0]], ids=("bad", "good"))
    out, dropped = apply_matrix(m, bias_of(mu), RenormMethod.R2, policy=DegeneratePolicy.DROP)
    assert out.count == 1
    assert out.ids == ("good",)
    assert dropped == ["bad"]


def test_parallel_row_keep_raw():
    m = matrix_of([[1.0, 0.0], [0.0, 1.0]], ids=("bad", "good"))
    out, dropped = apply_matrix(
        m, bias_of([0.3, 0.0]), RenormMethod.R2, policy=DegeneratePolicy.KEEP_RAW
    )
    assert out.count == 2
    assert np.array_equal(out.rows[0], np.array([1.0, 0.0], dtype=np.float32))
    assert dropped == []  # nothing left the matrix, so nothing to report


def test_parallel_row_fail_policy():
    m = matrix_of([[1.0, 0.0], [0.0, 1.0]], ids=("bad", "good"))
    with pytest.raises(DegenerateResidual, match="bad"):
        apply_matrix(m, bias_of([0.3, 0.0]), RenormMethod.R2, policy=DegeneratePolicy.FAIL)


def test_r2_postconditions_on_random_rows():
    # brute-force check of the documented output contract
    rng = stream(11, 0)
    rows = np.stack([unit_vector(rng, 16).astype(np.float32) for _ in range(1000)])
    m = matrix_of(rows)
    mu = unit_vector(stream(11, 1), 16) * 0.7
    out, dropped = apply_matrix(m, bias_of(mu), RenormMethod.R2)
    assert dropped == []
    mu_hat = mu / np.sqrt((mu * mu).sum())
    rows64 = out.rows.astype(np.float64)
    assert np.abs(rows64 @ mu_hat).max() <= 1e-6
    assert np.abs(np.sqrt((rows64 * rows64).sum(axis=1)) - 1.0).max() <= 1e-6


def test_scalar_matches_matrix_bitwise():
    rng = stream(12, 0)
    rows = np.stack([unit_vector(rng, 24).astype(np.float32) for _ in range(64)])
    m = matrix_of(rows)
    bias = bias_of(unit_vector(stream(12, 1), 24) * 0.4)
    for method, scalar in ((RenormMethod.R1, renormalize_r1), (RenormMethod.R2, renormalize_r2)):
        batch, _ = apply_matrix(m, bias, method)
        for i in range(m.count):
            assert np.array_equal(batch.rows[i], scalar(rows[i], bias)), (method, i)


def test_r2_reapply_is_bitwise_stable():
    rng = stream(13, 0)
    rows = np.stack([unit_vector(rng, 32).astype(np.float32) for _ in range(200)])
    bias = bias_of(unit_vector(stream(13, 1), 32) * 0.6)
    once, _ = apply_matrix(matrix_of(rows), bias, RenormMethod.R2)
    twice, _ = apply_matrix(once, bias, RenormMethod.R2)
    assert np.array_equal(once.rows, twice.rows)


def test_r2_scale_invariance():
    rng = stream(14, 0)
    e = unit_vector(rng, 32).astype(np.float32)
    mu = unit_vector(stream(14, 1), 32) * 0.2
    small = renormalize_r2(e, bias_of(mu))
    large = renormalize_r2(e, bias_of(mu * 4.0))
    assert np.abs(small.astype(np.float64) - large.astype(np.float64)).max() <= 1e-9


def test_matrix_validation():
    with pytest.raises(ValueError):
        matrix_of([[1.0, 0.0], [0.0, 1.0]], ids=("dup", "dup"))
    with pytest.raises(NotUnit):
        matrix_of([[0.5, 0.5]])
    ok = matrix_of([[0.5, 0.5]], normalized=False)  # flag off skips the norm check
    assert not ok.normalized
    with pytest.raises(ValueError):
        EmbeddingMatrix(
            rows=np.ones((2, 1), dtype=np.float32), ids=("a", "b"), normalized=False
        )


def test_fingerprint_row_order_invariant():
    a = matrix_of([[1.0, 0.0], [0.0, 1.0]], ids=("x", "y"))
    b = matrix_of([[0.0, 1.0], [1.0, 0.0]], ids=("y", "x"))
    assert matrix_fingerprint(a) == matrix_fingerprint(b)


def test_fingerprint_sensitive_to_content():
    a = matrix_of([[1.0, 0.0]], ids=("x",))
    b = matrix_of([[0.0, 1.0]], ids=("x",))
    c = matrix_of([[1.0, 0.0]], ids=("z",))
    assert matrix_fingerprint(a) != matrix_fingerprint(b)
    assert matrix_fingerprint(a) != matrix_fingerprint(c)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 3, 8, 64]))
def test_unit_and_orthogonality_properties(seed, dim):
    e = unit_vector(stream(seed, 0), dim).astype(np.float32)
    mu = unit_vector(stream(seed, 1), dim) * float(stream(seed, 2).uniform(0.05, 0.95))
    bias = bias_of(mu)
    for method in (renormalize_r1, renormalize_r2):
        try:
            out = method(e, bias).astype(np.float64)
        except DegenerateResidual:
            continue
        assert abs(np.sqrt((out * out).sum()) - 1.0) <= 1e-6
    try:
        out2 = renormalize_r2(e, bias).astype(np.float64)
    except DegenerateResidual:
        return
    mu_hat = mu / np.sqrt((mu * mu).sum())
    assert abs(float(out2 @ mu_hat)) <= 1e-6
