"""On-disk formats: binary embeddings, bias JSON, datasets, run records."""

import json
import struct

import numpy as np
import pytest

from embrenorm.core import BiasEstimate, EmbeddingMatrix, RenormMethod, matrix_fingerprint
from embrenorm.errors import (
    BadHeader,
    BadMagic,
    IdRowMismatch,
    NormMismatch,
    SchemaError,
    TruncatedPayload,
    VersionUnsupported,
)
from embrenorm.harness import RunRecord, run_task
from embrenorm.metrics import TaskScore
from embrenorm.rng import stream, unit_vector
from embrenorm.store import (
    read_bias,
    read_dataset,
    read_embeddings,
    read_records,
    write_bias,
    write_dataset,
    write_embeddings,
    write_records,
)
from embrenorm.synth import SynthConfig, generate
from embrenorm.tasks import TaskType

HEADER = struct.Struct("<4sIIQI")


@pytest.fixture
def small_matrix():
    rows = np.arange(12, dtype=np.float32).reshape(3, 4) / 16.0
    return EmbeddingMatrix(rows=rows, ids=("alpha", "beta", "gamma"), normalized=False)


def test_embeddings_round_trip(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    back = read_embeddings(path)
    assert back.dim == 4
    assert back.count == 3
    assert back.ids == small_matrix.ids
    assert np.array_equal(back.rows, small_matrix.rows)
    assert back.normalized == small_matrix.normalized


def test_embeddings_normalized_flag_round_trip(tmp_path):
    rng = stream(70, 0)
    rows = np.stack([unit_vector(rng, 8).astype(np.float32) for _ in range(4)])
    m = EmbeddingMatrix(rows=rows, ids=tuple("abcd"), normalized=True)
    path = str(tmp_path / "n.emb")
    write_embeddings(m, path)
    assert read_embeddings(path).normalized is True


def test_truncated_payload(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    data = open(path, "rb").read()
    with open(path, "wb") as f:
        f.write(data[:-1])
    with pytest.raises(TruncatedPayload):
        read_embeddings(path)


def test_trailing_garbage_rejected(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    with open(path, "ab") as f:
        f.write(b"\x00")
    with pytest.raises(TruncatedPayload):
        read_embeddings(path)


def test_zero_dim_header(tmp_path):
    path = str(tmp_path / "z.emb")
    with open(path, "wb") as f:
        f.write(HEADER.pack(b"EMB1", 1, 0, 0, 0))
    with open(f"{path}.ids.jsonl", "w") as f:
        f.write("")
    with pytest.raises(BadHeader):
        read_embeddings(path)


def test_bad_magic(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    data = bytearray(open(path, "rb").read())
    data[:4] = b"NOPE"
    with open(path, "wb") as f:
        f.write(bytes(data))
    with pytest.raises(BadMagic):
        read_embeddings(path)


def test_version_unsupported(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    data = bytearray(open(path, "rb").read())
    struct.pack_into("<I", data, 4, 2)
    with open(path, "wb") as f:
        f.write(bytes(data))
    with pytest.raises(VersionUnsupported):
        read_embeddings(path)


def test_short_header(tmp_path):
    path = str(tmp_path / "h.emb")
    with open(path, "wb") as f:
        f.write(b"EMB1\x01")
    with pytest.raises(TruncatedPayload):
        read_embeddings(path)


def id_sidecar_case(tmp_path, small_matrix, lines):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    with open(f"{path}.ids.jsonl", "w") as f:
        f.write("\n".join(lines) + "\n")
    return path


def test_sidecar_missing_row(tmp_path, small_matrix):
    path = id_sidecar_case(
        tmp_path, small_matrix,
        ['{"row":0,"id":"a"}', '{"row":2,"id":"c"}'],
    )
    with pytest.raises(IdRowMismatch):
        read_embeddings(path)


def test_sidecar_duplicate_row(tmp_path, small_matrix):
    path = id_sidecar_case(
        tmp_path, small_matrix,
        ['{"row":0,"id":"a"}', '{"row":0,"id":"b"}', '{"row":2,"id":"c"}'],
    )
    with pytest.raises(IdRowMismatch):
        read_embeddings(path)


def test_sidecar_out_of_range_row(tmp_path, small_matrix):
    path = id_sidecar_case(
        tmp_path, small_matrix,
        ['{"row":0,"id":"a"}', '{"row":1,"id":"b"}', '{"row":5,"id":"c"}'],
    )
    with pytest.raises(IdRowMismatch):
        read_embeddings(path)


def test_sidecar_absent(tmp_path, small_matrix):
    path = str(tmp_path / "m.emb")
    write_embeddings(small_matrix, path)
    import os

    os.remove(f"{path}.ids.jsonl")
    with pytest.raises(IdRowMismatch):
        read_embeddings(path)


# ------------------------------------------------------------ bias JSON


def bias_fixture(mu=(0.5, 0.5)):
    return BiasEstimate(
        mu=np.asarray(mu, dtype=np.float64),
        sample_count=2,
        corpus_fingerprint="c" * 64,
        model_id="demo-model",
    )


def test_bias_round_trip(tmp_path):
    path = str(tmp_path / "bias.json")
    write_bias(bias_fixture(), path, created_at_utc="2024-01-01T00:00:00Z")
    doc = json.load(open(path))
    assert doc["modelId"] == "demo-model"
    assert doc["dim"] == 2
    assert doc["count"] == 2
    assert doc["norm"] == 0.707106781
    assert doc["vector"] == [0.5, 0.5]
    assert doc["createdAtUtc"] == "2024-01-01T00:00:00Z"
    back = read_bias(path)
    assert back.model_id == "demo-model"
    assert back.sample_count == 2
    assert back.corpus_fingerprint == "c" * 64
    assert np.allclose(back.mu, [0.5, 0.5], atol=1e-9)


def test_bias_nine_digit_round_trip(tmp_path):
    mu = unit_vector(stream(71, 0), 6) * 0.32
    path = str(tmp_path / "bias.json")
    write_bias(
        BiasEstimate(mu=mu, sample_count=9, corpus_fingerprint="d" * 64, model_id="m"),
        path,
    )
    back = read_bias(path)
    # 9 significant digits keeps components to ~1e-9 relative error
    assert np.allclose(back.mu, mu, rtol=1e-8, atol=1e-12)


def test_bias_norm_mismatch(tmp_path):
    path = str(tmp_path / "bias.json")
    write_bias(bias_fixture(), path)
    doc = json.load(open(path))
    doc["norm"] = 0.9
    json.dump(doc, open(path, "w"))
    with pytest.raises(NormMismatch):
        read_bias(path)


def test_bias_missing_field(tmp_path):
    path = str(tmp_path / "bias.json")
    write_bias(bias_fixture(), path)
    doc = json.load(open(path))
    del doc["corpusFingerprint"]
    json.dump(doc, open(path, "w"))
    with pytest.raises(SchemaError):
        read_bias(path)


def test_bias_vector_length_mismatch(tmp_path):
    path = str(tmp_path / "bias.json")
    write_bias(bias_fixture(), path)
    doc = json.load(open(path))
    doc["vector"] = [0.5]
    json.dump(doc, open(path, "w"))
    with pytest.raises(SchemaError):
        read_bias(path)


# ------------------------------------------------------------ datasets


@pytest.mark.parametrize("task_type", list(TaskType))
def test_dataset_round_trip(tmp_path, task_type):
    bundle = generate(
        SynthConfig(
            dim=32, num_clusters=3, items_per_cluster=6, bias_norm=0.3,
            seed=13, task_type=task_type,
        )
    )
    ds = bundle.biased_dataset
    path = str(tmp_path / f"{task_type.value}.json")
    write_dataset(ds, path)
    back = read_dataset(path)
    assert back.task_id == ds.task_id
    assert back.task_type == ds.task_type
    assert back.source_fingerprint == ds.source_fingerprint
    for role, matrix in ds.matrices().items():
        got = back.matrices()[role]
        assert np.array_equal(got.rows, matrix.rows), role
        assert got.ids == matrix.ids, role
    if task_type is TaskType.RETRIEVAL:
        assert back.payload.qrels == ds.payload.qrels
    elif task_type is TaskType.STS:
        assert back.payload.pairs == ds.payload.pairs
        assert back.payload.gold == ds.payload.gold
    elif task_type is TaskType.CLASSIFICATION:
        assert back.payload.train_labels == ds.payload.train_labels
        assert back.payload.test_labels == ds.payload.test_labels
    elif task_type is TaskType.CLUSTERING:
        assert back.payload.labels == ds.payload.labels
    elif task_type is TaskType.PAIR_CLASSIFICATION:
        assert back.payload.pairs == ds.payload.pairs
        assert back.payload.labels == ds.payload.labels
    else:
        assert back.payload.gold_pairs == ds.payload.gold_pairs


def test_dataset_missing_field(tmp_path):
    bundle = generate(SynthConfig(dim=32, num_clusters=2, items_per_cluster=6, seed=14))
    path = str(tmp_path / "ds.json")
    write_dataset(bundle.biased_dataset, path)
    doc = json.load(open(path))
    del doc["sourceFingerprint"]
    json.dump(doc, open(path, "w"))
    with pytest.raises(SchemaError):
        read_dataset(path)


# ------------------------------------------------------------ records


def test_records_round_trip(tmp_path):
    bundle = generate(SynthConfig(dim=32, num_clusters=2, items_per_cluster=6, seed=15))
    ds = bundle.biased_dataset
    bias = BiasEstimate(
        mu=unit_vector(stream(72, 0), 32) * 0.2,
        sample_count=4,
        corpus_fingerprint="e" * 64,
        model_id="m",
    )
    ok = run_task(ds, bias, RenormMethod.R2)
    failed = RunRecord(
        task_id="broken",
        task_type=TaskType.CLASSIFICATION,
        method=RenormMethod.R1,
        status="failed",
        score=None,
        dropped_rows=0,
        wall_clock_ms=2.5,
        bias_fingerprint="e" * 64,
        error="KTooLarge: k=10 > 4 train rows",
    )
    path = str(tmp_path / "records.jsonl")
    write_records([ok, failed], path)
    back = read_records(path)
    assert len(back) == 2
    assert back[0].task_id == ok.task_id
    assert back[0].method is RenormMethod.R2
    assert back[0].status == "ok"
    assert back[0].score == ok.score
    assert back[1].status == "failed"
    assert back[1].score is None
    assert "KTooLarge" in back[1].error


def test_records_reject_bad_line(tmp_path):
    path = str(tmp_path / "records.jsonl")
    with open(path, "w") as f:
        f.write('{"taskId": "x"}\n')
    with pytest.raises(SchemaError):
        read_records(path)
