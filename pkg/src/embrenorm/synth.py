"""Synthetic benchmark with a known injected bias.

Geometry: cluster centers are drawn on the unit sphere under a
pairwise-cosine cap, items are normalized noisy copies of their
center, and a shared bias vector b is added to every item after
normalization, then renormalized.  Because b is known exactly and the
clean items are kept, the generator supports ground-truth checks the
real-corpus pipeline can only approximate.

The bias sweep estimates the mean from one half of the biased data,
evaluates on the other half (the leakage guard sees two different
fingerprints), and reports per-method deltas against the identity
baseline as the injected bias grows.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    BiasEstimate,
    DegeneratePolicy,
    EmbeddingMatrix,
    RenormMethod,
    matrix_fingerprint,
)
from .errors import RejectionBudgetExceeded
from .harness import RunRecord, run_task
from .mean import estimate_bias
from .rng import stream, unit_vector
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

CENTER_COSINE_CAP = 0.5
CENTER_DRAW_BUDGET = 1000


@dataclass(frozen=True)
class SynthConfig:
    dim: int = 128
    num_clusters: int = 8
    items_per_cluster: int = 50
    noise_scale: float = 0.3
    bias_norm: float = 0.0
    seed: int = 0
    task_type: TaskType = TaskType.RETRIEVAL

    def __post_init__(self):
        if self.dim < 16:
            raise ValueError(f"dim must be >= 16, got {self.dim}")
        if self.num_clusters < 2:
            raise ValueError(f"num_clusters must be >= 2, got {self.num_clusters}")
        if self.items_per_cluster < 5:
            raise ValueError(f"items_per_cluster must be >= 5, got {self.items_per_cluster}")
        if self.noise_scale <= 0.0:
            raise ValueError(f"noise_scale must be > 0, got {self.noise_scale}")
        if not 0.0 <= self.bias_norm < 1.0:
            raise ValueError(f"bias_norm must be in [0, 1), got {self.bias_norm}")


@dataclass(frozen=True)
class SynthBundle:
    config: SynthConfig
    clean_signals: EmbeddingMatrix
    biased_items: EmbeddingMatrix
    right_clean: EmbeddingMatrix
    right_biased: EmbeddingMatrix
    labels: tuple
    true_bias: np.ndarray
    clean_dataset: TaskDataset
    biased_dataset: TaskDataset


@dataclass(frozen=True)
class SweepRow:
    bias_norm: float
    seed: int
    method: str
    score: float
    delta: float
    sigma: float


def _sample_centers(rng, k: int, dim: int) -> np.ndarray:
    """Unit directions with pairwise cosine <= 0.5, rejection sampled."""
    centers: list[np.ndarray] = []
    for _ in range(CENTER_DRAW_BUDGET):
        c = unit_vector(rng, dim)
        if all(float(c @ prev) <= CENTER_COSINE_CAP for prev in centers):
            centers.append(c)
            if len(centers) == k:
                return np.stack(centers)
    raise RejectionBudgetExceeded(
        f"could not place {k} centers under cosine cap {CENTER_COSINE_CAP} "
        f"in {CENTER_DRAW_BUDGET} draws"
    )


def _normalize_rows(rows64: np.ndarray) -> np.ndarray:
    norms = np.sqrt((rows64 * rows64).sum(axis=1))
    return rows64 / norms[:, None]


def inject_bias(clean: EmbeddingMatrix, b: np.ndarray, bias_norm: float) -> EmbeddingMatrix:
    """normalize(row + b) for every row; bit-identical rows at norm 0."""
    if bias_norm == 0.0:
        return clean
    rows64 = clean.rows.astype(np.float64) + b
    return EmbeddingMatrix(_normalize_rows(rows64).astype(np.float32), clean.ids)


def _sample_pairs(rng, count: int, target: int) -> tuple:
    """Distinct unordered index pairs, deterministic for a given stream."""
    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    draws = 0
    while len(pairs) < target and draws < 20 * target:
        i = int(rng.integers(0, count))
        j = int(rng.integers(0, count))
        draws += 1
        if i == j:
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            continue
        seen.add(key)
        pairs.append(key)
    return tuple(pairs)


def _build_payload(
    task_type: TaskType,
    items: EmbeddingMatrix,
    labels,
    gold_basis: EmbeddingMatrix,
    right: EmbeddingMatrix,
    pair_rng,
):
    """Supervision for one task over the given item matrix.

    gold_basis supplies latent-truth vectors for STS gold scores (the
    clean signals, never the biased ones).  Pair sampling uses its own
    stream, so clean and biased datasets from one generate() call get
    identical supervision.
    """
    labels = tuple(labels)
    n = items.count
    if task_type is TaskType.RETRIEVAL:
        qrels = {}
        for i, qid in enumerate(items.ids):
            docs = {
                items.ids[j]: 1.0
                for j in range(n)
                if labels[j] == labels[i] and j != i
            }
            qrels[qid] = docs
        return RetrievalPayload(queries=items, corpus=items, qrels=qrels)

    if task_type is TaskType.CLASSIFICATION:
        by_cluster: dict = {}
        for i, lab in enumerate(labels):
            by_cluster.setdefault(lab, []).append(i)
        train_idx, test_idx = [], []
        for lab in sorted(by_cluster):
            members = by_cluster[lab]
            train_idx.extend(members[0::2])
            test_idx.extend(members[1::2])
        sub = lambda idx: EmbeddingMatrix(items.rows[idx], [items.ids[i] for i in idx])
        return ClassificationPayload(
            train=sub(train_idx),
            train_labels=tuple(labels[i] for i in train_idx),
            test=sub(test_idx),
            test_labels=tuple(labels[i] for i in test_idx),
        )

    if task_type is TaskType.STS:
        pairs = _sample_pairs(pair_rng, n, min(1000, n * (n - 1) // 2))
        basis64 = gold_basis.rows.astype(np.float64)
        gold = tuple(float(basis64[i] @ basis64[j]) for i, j in pairs)
        return StsPayload(items=items, pairs=pairs, gold=gold)

    if task_type is TaskType.CLUSTERING:
        return ClusteringPayload(items=items, labels=labels)

    if task_type is TaskType.PAIR_CLASSIFICATION:
        pairs = list(_sample_pairs(pair_rng, n, min(1000, n * (n - 1) // 2)))
        flags = [labels[i] == labels[j] for i, j in pairs]
        if not any(flags):
            first_cluster = [i for i, lab in enumerate(labels) if lab == labels[0]]
            pairs.append((first_cluster[0], first_cluster[1]))
            flags.append(True)
        return PairClassificationPayload(items=items, pairs=tuple(pairs), labels=tuple(flags))

    if task_type is TaskType.BITEXT:
        gold = tuple((i, i) for i in range(n))
        return BitextPayload(left=items, right=right, gold_pairs=gold)

    raise ValueError(f"unhandled task type {task_type}")


def generate(cfg: SynthConfig) -> SynthBundle:
    """Build matched clean and biased datasets with known ground truth."""
    dim, k, ipc = cfg.dim, cfg.num_clusters, cfg.items_per_cluster
    n = k * ipc
    centers = _sample_centers(stream(cfg.seed, 0), k, dim)

    noise = stream(cfg.seed, 1)
    spread = cfg.noise_scale * noise.normal(size=(n, dim))
    base = np.repeat(centers, ipc, axis=0)
    clean64 = _normalize_rows(base + spread)
    ids = tuple(f"c{c:02d}-r{r:03d}" for c in range(k) for r in range(ipc))
    labels = tuple(c for c in range(k) for _ in range(ipc))
    clean = EmbeddingMatrix(clean64.astype(np.float32), ids)

    # Second view: a perturbed copy of each item, for bitext mining.
    view = stream(cfg.seed, 3)
    right64 = _normalize_rows(clean64 + 0.5 * cfg.noise_scale * view.normal(size=(n, dim)))
    right_clean = EmbeddingMatrix(right64.astype(np.float32), ids)

    b = cfg.bias_norm * unit_vector(stream(cfg.seed, 2), dim)
    biased = inject_bias(clean, b, cfg.bias_norm)
    right_biased = inject_bias(right_clean, b, cfg.bias_norm)

    def dataset(tag: str, items: EmbeddingMatrix, right: EmbeddingMatrix) -> TaskDataset:
        payload = _build_payload(
            cfg.task_type, items, labels, gold_basis=clean, right=right, pair_rng=stream(cfg.seed, 4)
        )
        return TaskDataset(
            task_id=f"synth-{cfg.task_type.value}-s{cfg.seed}-{tag}",
            task_type=cfg.task_type,
            payload=payload,
            source_fingerprint=matrix_fingerprint(items),
        )

    return SynthBundle(
        config=cfg,
        clean_signals=clean,
        biased_items=biased,
        right_clean=right_clean,
        right_biased=right_biased,
        labels=labels,
        true_bias=b,
        clean_dataset=dataset("clean", clean, right_clean),
        biased_dataset=dataset("biased", biased, right_biased),
    )


def split_half_indices(labels) -> tuple[list[int], list[int]]:
    """Cluster-balanced halves: first half of each cluster estimates
    the bias, the second half is evaluated."""
    by_cluster: dict = {}
    for i, lab in enumerate(labels):
        by_cluster.setdefault(lab, []).append(i)
    est, ev = [], []
    for lab in sorted(by_cluster):
        members = by_cluster[lab]
        cut = len(members) // 2
        est.extend(members[:cut])
        ev.extend(members[cut:])
    return est, ev


def _subset(matrix: EmbeddingMatrix, idx: list[int]) -> EmbeddingMatrix:
    return EmbeddingMatrix(matrix.rows[idx], [matrix.ids[i] for i in idx],
                           normalized=matrix.normalized)


def sweep_cell(
    cfg: SynthConfig,
    methods,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
) -> dict[RenormMethod, RunRecord]:
    """One (bias_norm, seed) cell: generate, split, estimate, evaluate."""
    bundle = generate(cfg)
    est_idx, eval_idx = split_half_indices(bundle.labels)
    est = _subset(bundle.biased_items, est_idx)
    bias = estimate_bias(est, matrix_fingerprint(est), model_id=f"synth-s{cfg.seed}")

    eval_items = _subset(bundle.biased_items, eval_idx)
    eval_labels = tuple(bundle.labels[i] for i in eval_idx)
    payload = _build_payload(
        cfg.task_type,
        eval_items,
        eval_labels,
        gold_basis=_subset(bundle.clean_signals, eval_idx),
        right=_subset(bundle.right_biased, eval_idx),
        pair_rng=stream(cfg.seed, 5),
    )
    ds = TaskDataset(
        task_id=f"synth-{cfg.task_type.value}-b{cfg.bias_norm:g}-s{cfg.seed}",
        task_type=cfg.task_type,
        payload=payload,
        source_fingerprint=matrix_fingerprint(eval_items),
    )

    wanted = [RenormMethod.IDENTITY] + [m for m in methods if m is not RenormMethod.IDENTITY]
    return {m: run_task(ds, bias, m, policy=policy, seed=cfg.seed) for m in wanted}


def sweep_bias(
    cfg: SynthConfig,
    bias_norms,
    methods,
    seeds=None,
    policy: DegeneratePolicy = DegeneratePolicy.DROP,
) -> list[SweepRow]:
    """Deltas against identity across bias norms (and optional seeds)."""
    seeds = [cfg.seed] if seeds is None else [int(s) for s in seeds]
    rows: list[SweepRow] = []
    for bias_norm in bias_norms:
        for seed in seeds:
            cell_cfg = replace(cfg, bias_norm=float(bias_norm), seed=seed)
            records = sweep_cell(cell_cfg, methods, policy)
            base = records[RenormMethod.IDENTITY].score.value
            for method, record in records.items():
                rows.append(
                    SweepRow(
                        bias_norm=float(bias_norm),
                        seed=seed,
                        method=method.value,
                        score=record.score.value,
                        delta=record.score.value - base,
                        sigma=record.score.sigma,
                    )
                )
    return rows


def similarity_alignment(a: EmbeddingMatrix, b: EmbeddingMatrix) -> float:
    """Cosine between the off-diagonal pairwise-similarity profiles.

    1.0 means matrix a reproduces the pairwise geometry of matrix b
    exactly, whatever the absolute rotation.
    """
    if a.count != b.count or a.dim != b.dim:
        raise ValueError("matrices must have matching shape")
    a64 = a.rows.astype(np.float64)
    b64 = b.rows.astype(np.float64)
    sa = a64 @ a64.T
    sb = b64 @ b64.T
    mask = ~np.eye(a.count, dtype=bool)
    va = sa[mask]
    vb = sb[mask]
    return float((va @ vb) / np.sqrt((va @ va) * (vb @ vb)))
