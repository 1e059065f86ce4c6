"""Evaluation harness: apply a removal method, score the task.

runTask renormalizes every matrix in the payload (queries and corpus
both, train and test both) with one shared bias estimate, reconciles
any dropped rows with the supervision, and returns a RunRecord.

The leakage guard runs before anything else: if the bias was
estimated on the very data being scored (equal fingerprints), scoring
refuses.  A suite isolates failures per (task, method) pair instead
of aborting the whole run.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    BiasEstimate,
    DegeneratePolicy,
    EmbeddingMatrix,
    RenormMethod,
    apply_matrix,
)
from .errors import DimensionMismatch, LeakageDetected
from .metrics import (
    RankedList,
    TaskScore,
    bitext_f1,
    knn_classify,
    ndcg_at_k,
    pair_average_precision,
    sigma_for,
    spearman,
    spherical_kmeans_vmeasure,
)
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

DEFAULT_KNN_K = 10
DEFAULT_NDCG_K = 10
DEFAULT_CLUSTER_RESTARTS = 4


@dataclass(frozen=True)
class RunRecord:
    task_id: str
    task_type: TaskType
    method: RenormMethod
    status: str  # "ok" or "failed"
    score: TaskScore | None
    dropped_rows: int
    wall_clock_ms: float
    bias_fingerprint: str
    error: str | None = None


def _surviving_pairs(pairs, extras, dropped_ids: set, matrix: EmbeddingMatrix, new: EmbeddingMatrix):
    """Filter index pairs whose rows were dropped and remap the rest."""
    if not dropped_ids:
        return pairs, extras
    remap = {}
    new_index = new.row_index()
    for old_i, id_ in enumerate(matrix.ids):
        if id_ in new_index:
            remap[old_i] = new_index[id_]
    kept_pairs, kept_extras = [], []
    for pair, extra in zip(pairs, extras):
        i, j = pair
        if i in remap and j in remap:
            kept_pairs.append((remap[i], remap[j]))
            kept_extras.append(extra)
    return tuple(kept_pairs), tuple(kept_extras)


def _pair_cosines(matrix: EmbeddingMatrix, pairs) -> np.ndarray:
    rows64 = matrix.rows.astype(np.float64)
    left = rows64[[i for i, _ in pairs]]
    right = rows64[[j for _, j in pairs]]
    return (left * right).sum(axis=1)


def run_task(
    ds: TaskDataset,
    bias: BiasEstimate,
    method: RenormMethod,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
    seed: int = 0,
    knn_k: int = DEFAULT_KNN_K,
    ndcg_k: int = DEFAULT_NDCG_K,
    cluster_restarts: int = DEFAULT_CLUSTER_RESTARTS,
) -> RunRecord:
    """Score one task under one removal method."""
    if bias.corpus_fingerprint == ds.source_fingerprint:
        raise LeakageDetected(
            f"bias for task {ds.task_id!r} was estimated on the evaluation data itself"
        )
    if ds.dim != bias.dim:
        raise DimensionMismatch(f"task dim {ds.dim} vs bias dim {bias.dim}")

    t0 = time.perf_counter()
    p = ds.payload
    dropped_total = 0

    def transform(matrix: EmbeddingMatrix) -> tuple[EmbeddingMatrix, set]:
        nonlocal dropped_total
        out, dropped = apply_matrix(matrix, bias, method, policy)
        dropped_total += len(dropped)
        return out, set(dropped)

    if isinstance(p, RetrievalPayload):
        queries, q_dropped = transform(p.queries)
        corpus, c_dropped = transform(p.corpus)
        doc_ids = np.asarray(corpus.ids)
        corpus64 = corpus.rows.astype(np.float64).T
        values = []
        for qid in sorted(p.qrels):
            if qid in q_dropped or qid not in set(queries.ids):
                continue
            relevance = {d: g for d, g in p.qrels[qid].items() if d not in c_dropped}
            qvec = queries.rows[queries.row_index()[qid]].astype(np.float64)
            sims = qvec @ corpus64
            ranked = RankedList.from_scores(qid, doc_ids.tolist(), sims.tolist())
            values.append(ndcg_at_k(ranked, relevance, ndcg_k))
        if not values:
            raise ValueError(f"no scorable queries left in task {ds.task_id!r}")
        value = sum(values) / len(values)
        n = len(values)
        score = TaskScore(f"ndcg@{ndcg_k}", value, n, sigma_for(f"ndcg@{ndcg_k}", value, n))

    elif isinstance(p, ClassificationPayload):
        train, tr_dropped = transform(p.train)
        test, te_dropped = transform(p.test)
        train_labels = [l for l, id_ in zip(p.train_labels, p.train.ids) if id_ not in tr_dropped]
        test_labels = [l for l, id_ in zip(p.test_labels, p.test.ids) if id_ not in te_dropped]
        accuracy, _, correct = knn_classify(train, train_labels, test, test_labels, k=knn_k)
        n = len(correct)
        score = TaskScore("accuracy", accuracy, n, sigma_for("accuracy", accuracy, n))

    elif isinstance(p, StsPayload):
        items, dropped = transform(p.items)
        pairs, gold = _surviving_pairs(p.pairs, p.gold, dropped, p.items, items)
        preds = _pair_cosines(items, pairs)
        value = spearman(preds, np.asarray(gold))
        n = len(pairs)
        pts = np.column_stack([preds, np.asarray(gold, dtype=np.float64)])
        score = TaskScore("spearman", value, n, sigma_for("spearman", value, n, pairs=pts, seed=seed))

    elif isinstance(p, ClusteringPayload):
        items, dropped = transform(p.items)
        labels = [l for l, id_ in zip(p.labels, p.items.ids) if id_ not in dropped]
        k = len(set(labels))
        value, _ = spherical_kmeans_vmeasure(
            items, labels, k, restarts=cluster_restarts, seed=seed
        )
        n = items.count
        score = TaskScore("v_measure", value, n, sigma_for("v_measure", value, n))

    elif isinstance(p, PairClassificationPayload):
        items, dropped = transform(p.items)
        pairs, labels = _surviving_pairs(p.pairs, p.labels, dropped, p.items, items)
        preds = _pair_cosines(items, pairs)
        value = pair_average_precision(preds.tolist(), list(labels))
        n = len(pairs)
        score = TaskScore("ap", value, n, sigma_for("ap", value, n))

    elif isinstance(p, BitextPayload):
        left, l_dropped = transform(p.left)
        right, r_dropped = transform(p.right)
        gold = p.gold_pairs
        if l_dropped or r_dropped:
            l_remap = {old: new for new, old in enumerate(
                i for i, id_ in enumerate(p.left.ids) if id_ not in l_dropped)}
            r_remap = {old: new for new, old in enumerate(
                j for j, id_ in enumerate(p.right.ids) if id_ not in r_dropped)}
            gold = tuple(
                (l_remap[i], r_remap[j]) for i, j in gold if i in l_remap and j in r_remap
            )
        value, _, _ = bitext_f1(left, right, gold)
        n = max(len(gold), 1)
        score = TaskScore("bitext_f1", value, n, sigma_for("bitext_f1", value, n))

    else:
        raise TypeError(f"unhandled payload {type(p).__name__}")

    wall_ms = (time.perf_counter() - t0) * 1000.0
    return RunRecord(
        task_id=ds.task_id,
        task_type=ds.task_type,
        method=method,
        status="ok",
        score=score,
        dropped_rows=dropped_total,
        wall_clock_ms=wall_ms,
        bias_fingerprint=bias.corpus_fingerprint,
    )


def run_suite(
    datasets,
    bias: BiasEstimate,
    methods,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
    seed: int = 0,
    threads: int = 1,
    **task_kwargs,
) -> list[RunRecord]:
    """Run every (task, method) combination.

    Output is ordered lexicographically by (task_id, method value).
    A failing combination becomes a failed record; it never takes the
    rest of the suite down with it.
    """
    datasets = list(datasets)
    by_id = {ds.task_id: ds for ds in datasets}
    if len(by_id) != len(datasets):
        raise ValueError("duplicate task ids in suite")
    combos = sorted(
        ((tid, m) for tid in by_id for m in methods),
        key=lambda c: (c[0], c[1].value),
    )

    def one(combo) -> RunRecord:
        tid, m = combo
        ds = by_id[tid]
        t0 = time.perf_counter()
        try:
            return run_task(ds, bias, m, policy=policy, seed=seed, **task_kwargs)
        except Exception as exc:
            wall_ms = (time.perf_counter() - t0) * 1000.0
            return RunRecord(
                task_id=tid,
                task_type=ds.task_type,
                method=m,
                status="failed",
                score=None,
                dropped_rows=0,
                wall_clock_ms=wall_ms,
                bias_fingerprint=bias.corpus_fingerprint,
                error=f"{type(exc).__name__}: {exc}",
            )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, combos))
    return [one(c) for c in combos]
