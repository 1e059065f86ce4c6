"""Task dataset containers for the evaluation harness.

A TaskDataset bundles embeddings with supervision for one task and
carries the fingerprint of the text (or synthetic matrix) it was
embedded from, which is what the leakage guard compares against the
bias estimate's corpus fingerprint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import EmbeddingMatrix, is_hex_fingerprint
from .errors import DimensionMismatch, NonFinite


class TaskType(Enum):
    RETRIEVAL = "retrieval"
    CLASSIFICATION = "classification"
    STS = "sts"
    CLUSTERING = "clustering"
    PAIR_CLASSIFICATION = "pair-classification"
    BITEXT = "bitext"


def _check_split(name: str, matrix: EmbeddingMatrix) -> None:
    if matrix.count < 2:
        raise ValueError(f"{name} needs at least 2 items, got {matrix.count}")


@dataclass(frozen=True)
class RetrievalPayload:
    queries: EmbeddingMatrix
    corpus: EmbeddingMatrix
    qrels: dict  # query id -> {doc id -> grade}

    def __post_init__(self):
        _check_split("queries", self.queries)
        _check_split("corpus", self.corpus)
        if self.queries.dim != self.corpus.dim:
            raise DimensionMismatch("query and corpus dims differ")
        qids = set(self.queries.ids)
        dids = set(self.corpus.ids)
        for qid, docs in self.qrels.items():
            if qid not in qids:
                raise ValueError(f"qrels references unknown query {qid!r}")
            for did, grade in docs.items():
                if did not in dids:
                    raise ValueError(f"qrels references unknown doc {did!r}")
                g = float(grade)
                if not np.isfinite(g) or g < 0:
                    raise NonFinite(f"bad grade {grade!r} for ({qid!r}, {did!r})")


@dataclass(frozen=True)
class ClassificationPayload:
    train: EmbeddingMatrix
    train_labels: tuple
    test: EmbeddingMatrix
    test_labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "train_labels", tuple(self.train_labels))
        object.__setattr__(self, "test_labels", tuple(self.test_labels))
        _check_split("train", self.train)
        _check_split("test", self.test)
        if self.train.dim != self.test.dim:
            raise DimensionMismatch("train and test dims differ")
        if len(self.train_labels) != self.train.count:
            raise ValueError("one label per train row required")
        if len(self.test_labels) != self.test.count:
            raise ValueError("one label per test row required")


def _check_pairs(pairs, count: int) -> tuple:
    out = []
    for i, j in pairs:
        i, j = int(i), int(j)
        if not (0 <= i < count and 0 <= j < count):
            raise ValueError(f"pair ({i}, {j}) out of range for {count} items")
        out.append((i, j))
    return tuple(out)


@dataclass(frozen=True)
class StsPayload:
    items: EmbeddingMatrix
    pairs: tuple
    gold: tuple

    def __post_init__(self):
        _check_split("items", self.items)
        object.__setattr__(self, "pairs", _check_pairs(self.pairs, self.items.count))
        gold = tuple(float(g) for g in self.gold)
        if len(gold) != len(self.pairs):
            raise ValueError("one gold score per pair required")
        if gold and not np.all(np.isfinite(gold)):
            raise NonFinite("gold scores must be finite")
        object.__setattr__(self, "gold", gold)


@dataclass(frozen=True)
class ClusteringPayload:
    items: EmbeddingMatrix
    labels: tuple

    def __post_init__(self):
        _check_split("items", self.items)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != self.items.count:
            raise ValueError("one label per item required")


@dataclass(frozen=True)
class PairClassificationPayload:
    items: EmbeddingMatrix
    pairs: tuple
    labels: tuple

    def __post_init__(self):
        _check_split("items", self.items)
        object.__setattr__(self, "pairs", _check_pairs(self.pairs, self.items.count))
        labels = tuple(bool(b) for b in self.labels)
        if len(labels) != len(self.pairs):
            raise ValueError("one label per pair required")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class BitextPayload:
    left: EmbeddingMatrix
    right: EmbeddingMatrix
    gold_pairs: tuple

    def __post_init__(self):
        _check_split("left", self.left)
        _check_split("right", self.right)
        if self.left.dim != self.right.dim:
            raise DimensionMismatch("left and right dims differ")
        out = []
        for i, j in self.gold_pairs:
            i, j = int(i), int(j)
            if not (0 <= i < self.left.count and 0 <= j < self.right.count):
                raise ValueError(f"gold pair ({i}, {j}) out of range")
            out.append((i, j))
        object.__setattr__(self, "gold_pairs", tuple(out))


_PAYLOAD_TYPES = {
    TaskType.RETRIEVAL: RetrievalPayload,
    TaskType.CLASSIFICATION: ClassificationPayload,
    TaskType.STS: StsPayload,
    TaskType.CLUSTERING: ClusteringPayload,
    TaskType.PAIR_CLASSIFICATION: PairClassificationPayload,
    TaskType.BITEXT: BitextPayload,
}


@dataclass(frozen=True)
class TaskDataset:
    task_id: str
    task_type: TaskType
    payload: object
    source_fingerprint: str

    def __post_init__(self):
        if not self.task_id:
            raise ValueError("task_id must be non-empty")
        expected = _PAYLOAD_TYPES[self.task_type]
        if not isinstance(self.payload, expected):
            raise TypeError(
                f"{self.task_type.value} task needs {expected.__name__}, "
                f"got {type(self.payload).__name__}"
            )
        if not is_hex_fingerprint(self.source_fingerprint):
            raise ValueError("source_fingerprint must be 64 lowercase hex digits")

    def matrices(self) -> dict[str, EmbeddingMatrix]:
        """The embedding matrices in this payload, keyed by role."""
        p = self.payload
        if isinstance(p, RetrievalPayload):
            return {"queries": p.queries, "corpus": p.corpus}
        if isinstance(p, ClassificationPayload):
            return {"train": p.train, "test": p.test}
        if isinstance(p, BitextPayload):
            return {"left": p.left, "right": p.right}
        return {"items": p.items}

    @property
    def dim(self) -> int:
        return next(iter(self.matrices().values())).dim
