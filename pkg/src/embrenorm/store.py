"""Bit-exact file formats.

Four artifact kinds live here:

* embeddings: a small binary header followed by float32 rows, with
  string ids in a JSON-lines sidecar next to the file;
* bias estimates: diff-able JSON with the vector at 9 significant
  digits;
* task datasets: one JSON document referencing embedding files by
  relative path, with labels / qrels / pairs inline;
* run records: JSON lines, one record per line.

Readers reject malformed input instead of repairing it.  Writers go
through a temp file in the target directory and rename into place.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from datetime import datetime, timezone

import numpy as np

from .core import BiasEstimate, EmbeddingMatrix
from .errors import (
    BadHeader,
    BadMagic,
    IdRowMismatch,
    NormMismatch,
    SchemaError,
    TruncatedPayload,
    VersionUnsupported,
)
from .harness import RunRecord
from .metrics import TaskScore
from .tasks import (
    BitextPayload,
    ClassificationPayload,
    ClusteringPayload,
    PairClassificationPayload,
    RetrievalPayload,
    StsPayload,
    TaskDataset,
    TaskType,
)

MAGIC = b"EMB1"
VERSION = 1
_HEADER = struct.Struct("<4sIIQI")  # magic, version, dim, count, flags
FLAG_NORMALIZED = 1


def _ids_path(path: str) -> str:
    return f"{path}.ids.jsonl"


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embeddings(matrix: EmbeddingMatrix, path: str) -> None:
    flags = FLAG_NORMALIZED if matrix.normalized else 0
    header = _HEADER.pack(MAGIC, VERSION, matrix.dim, matrix.count, flags)
    _atomic_write(path, header + matrix.rows.tobytes(order="C"))
    lines = [
        json.dumps({"row": i, "id": mid}, separators=(",", ":"))
        for i, mid in enumerate(matrix.ids)
    ]
    payload = ("\n".join(lines) + "\n") if lines else ""
    _atomic_write(_ids_path(path), payload.encode("utf-8"))


def _read_ids(path: str, count: int) -> tuple[str, ...]:
    sidecar = _ids_path(path)
    if not os.path.exists(sidecar):
        raise IdRowMismatch(f"missing ids sidecar {sidecar}")
    ids: list[str | None] = [None] * count
    with open(sidecar, "r", encoding="utf-8") as fh:
        seen = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IdRowMismatch(f"{sidecar}:{lineno}: bad JSON: {exc}") from exc
            if not isinstance(rec, dict) or "row" not in rec or "id" not in rec:
                raise IdRowMismatch(f"{sidecar}:{lineno}: need row and id fields")
            row, mid = rec["row"], rec["id"]
            if not isinstance(row, int) or not 0 <= row < count:
                raise IdRowMismatch(f"{sidecar}:{lineno}: row {row!r} out of range 0..{count - 1}")
            if not isinstance(mid, str):
                raise IdRowMismatch(f"{sidecar}:{lineno}: id must be a string")
            if ids[row] is not None:
                raise IdRowMismatch(f"{sidecar}:{lineno}: duplicate row {row}")
            ids[row] = mid
            seen += 1
    if seen != count:
        raise IdRowMismatch(f"{sidecar}: {seen} ids for {count} rows")
    return tuple(ids)  # type: ignore[arg-type]


def read_embeddings(path: str) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{path}: {len(raw)} bytes, header needs {_HEADER.size}")
    magic, version, dim, count, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionUnsupported(f"{path}: version {version}, only {VERSION} supported")
    if dim == 0:
        raise BadHeader(f"{path}: dim is 0")
    expected = _HEADER.size + count * dim * 4
    if len(raw) != expected:
        raise TruncatedPayload(f"{path}: {len(raw)} bytes, header implies {expected}")
    rows = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    ids = _read_ids(path, count)
    return EmbeddingMatrix(rows=rows, ids=ids, normalized=bool(flags & FLAG_NORMALIZED))


def _round9(x: float) -> float:
    return float(f"{x:.9g}")


def write_bias(bias: BiasEstimate, path: str, created_at_utc: str | None = None) -> None:
    if created_at_utc is None:
        created_at_utc = datetime.now(timezone.utc).isoformat(timespec="seconds")
    doc = {
        "modelId": bias.model_id,
        "dim": bias.dim,
        "count": bias.sample_count,
        "norm": _round9(bias.norm),
        "vector": [_round9(v) for v in bias.mu.tolist()],
        "corpusFingerprint": bias.corpus_fingerprint,
        "createdAtUtc": created_at_utc,
    }
    _atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode("utf-8"))


_BIAS_FIELDS = ("modelId", "dim", "count", "norm", "vector", "corpusFingerprint", "createdAtUtc")


def read_bias(path: str) -> BiasEstimate:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: bad JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    missing = [f for f in _BIAS_FIELDS if f not in doc]
    if missing:
        raise SchemaError(f"{path}: missing fields {missing}")
    vector = doc["vector"]
    if not isinstance(vector, list) or len(vector) != doc["dim"]:
        raise SchemaError(f"{path}: vector length does not match dim {doc['dim']}")
    mu = np.asarray(vector, dtype=np.float64)
    actual = math.sqrt(float((mu * mu).sum()))
    if abs(actual - float(doc["norm"])) > 1e-6:
        raise NormMismatch(f"{path}: stored norm {doc['norm']} but vector norm {actual:.9g}")
    return BiasEstimate(
        mu=mu,
        sample_count=int(doc["count"]),
        corpus_fingerprint=doc["corpusFingerprint"],
        model_id=doc["modelId"],
    )


def _write_matrix_for(role: str, matrix: EmbeddingMatrix, json_path: str, task_id: str) -> str:
    rel = f"{task_id}.{role}.emb"
    write_embeddings(matrix, os.path.join(os.path.dirname(os.path.abspath(json_path)), rel))
    return rel


def write_dataset(ds: TaskDataset, path: str) -> None:
    """One JSON document plus one .emb file per embedding role.

    Embedding files land next to the JSON and are referenced by
    relative path, so the bundle moves as a directory.
    """
    p = ds.payload
    doc: dict = {
        "taskId": ds.task_id,
        "taskType": ds.task_type.value,
        "sourceFingerprint": ds.source_fingerprint,
        "embeddings": {},
    }
    for role, matrix in ds.matrices().items():
        doc["embeddings"][role] = _write_matrix_for(role, matrix, path, ds.task_id)
    if isinstance(p, RetrievalPayload):
        doc["qrels"] = {q: dict(rels) for q, rels in p.qrels.items()}
    elif isinstance(p, ClassificationPayload):
        doc["trainLabels"] = list(p.train_labels)
        doc["testLabels"] = list(p.test_labels)
    elif isinstance(p, StsPayload):
        doc["pairs"] = [list(pair) for pair in p.pairs]
        doc["gold"] = list(p.gold)
    elif isinstance(p, ClusteringPayload):
        doc["labels"] = list(p.labels)
    elif isinstance(p, PairClassificationPayload):
        doc["pairs"] = [list(pair) for pair in p.pairs]
        doc["labels"] = list(p.labels)
    elif isinstance(p, BitextPayload):
        doc["goldPairs"] = [list(pair) for pair in p.gold_pairs]
    else:
        raise SchemaError(f"unsupported payload type {type(p).__name__}")
    _atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode("utf-8"))


def _require(doc: dict, field: str, path: str):
    if field not in doc:
        raise SchemaError(f"{path}: missing field {field!r}")
    return doc[field]


def read_dataset(path: str) -> TaskDataset:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: bad JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    task_id = _require(doc, "taskId", path)
    try:
        task_type = TaskType(_require(doc, "taskType", path))
    except ValueError as exc:
        raise SchemaError(f"{path}: unknown task type: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    emb = {
        role: read_embeddings(os.path.join(base, rel))
        for role, rel in _require(doc, "embeddings", path).items()
    }

    def need(role: str) -> EmbeddingMatrix:
        if role not in emb:
            raise SchemaError(f"{path}: missing embeddings role {role!r}")
        return emb[role]

    if task_type is TaskType.RETRIEVAL:
        qrels_doc = _require(doc, "qrels", path)
        qrels = {q: {d: float(g) for d, g in rels.items()} for q, rels in qrels_doc.items()}
        payload = RetrievalPayload(queries=need("queries"), corpus=need("corpus"), qrels=qrels)
    elif task_type is TaskType.CLASSIFICATION:
        payload = ClassificationPayload(
            train=need("train"),
            train_labels=tuple(_require(doc, "trainLabels", path)),
            test=need("test"),
            test_labels=tuple(_require(doc, "testLabels", path)),
        )
    elif task_type is TaskType.STS:
        payload = StsPayload(
            items=need("items"),
            pairs=tuple((int(a), int(b)) for a, b in _require(doc, "pairs", path)),
            gold=tuple(float(g) for g in _require(doc, "gold", path)),
        )
    elif task_type is TaskType.CLUSTERING:
        payload = ClusteringPayload(
            items=need("items"), labels=tuple(_require(doc, "labels", path))
        )
    elif task_type is TaskType.PAIR_CLASSIFICATION:
        payload = PairClassificationPayload(
            items=need("items"),
            pairs=tuple((int(a), int(b)) for a, b in _require(doc, "pairs", path)),
            labels=tuple(bool(b) for b in _require(doc, "labels", path)),
        )
    elif task_type is TaskType.BITEXT:
        payload = BitextPayload(
            left=need("left"),
            right=need("right"),
            gold_pairs=tuple((int(a), int(b)) for a, b in _require(doc, "goldPairs", path)),
        )
    else:  # pragma: no cover - TaskType is exhaustive above
        raise SchemaError(f"{path}: unhandled task type {task_type}")
    return TaskDataset(
        task_id=task_id,
        task_type=task_type,
        payload=payload,
        source_fingerprint=_require(doc, "sourceFingerprint", path),
    )


def _record_to_doc(record: RunRecord) -> dict:
    doc = {
        "taskId": record.task_id,
        "taskType": record.task_type.value,
        "method": record.method.value,
        "status": record.status,
        "droppedRows": record.dropped_rows,
        "wallClockMs": record.wall_clock_ms,
        "biasFingerprint": record.bias_fingerprint,
    }
    if record.score is not None:
        doc["score"] = {
            "metric": record.score.metric,
            "value": record.score.value,
            "n": record.score.n,
            "sigma": record.score.sigma,
        }
    if record.error:
        doc["error"] = record.error
    return doc


def write_records(records: list[RunRecord], path: str) -> None:
    lines = [json.dumps(_record_to_doc(r), separators=(",", ":")) for r in records]
    payload = ("\n".join(lines) + "\n") if lines else ""
    _atomic_write(path, payload.encode("utf-8"))


def read_records(path: str) -> list[RunRecord]:
    from .core import RenormMethod

    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            score = None
            if "score" in doc:
                s = doc["score"]
                score = TaskScore(
                    metric=s["metric"], value=s["value"], n=s["n"], sigma=s["sigma"]
                )
            try:
                out.append(
                    RunRecord(
                        task_id=doc["taskId"],
                        task_type=TaskType(doc["taskType"]),
                        method=RenormMethod(doc["method"]),
                        status=doc["status"],
                        score=score,
                        dropped_rows=doc["droppedRows"],
                        wall_clock_ms=doc["wallClockMs"],
                        bias_fingerprint=doc["biasFingerprint"],
                        error=doc.get("error", ""),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return out
