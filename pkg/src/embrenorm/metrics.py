"""Task metrics with pinned tie-breaking and summation order.

Every metric here is deterministic down to the last bit: ranking ties
break lexicographically by id (or input index), reductions over ranked
items run sequentially in rank order, and per-class or per-cluster
sums iterate in sorted key order.  Scores are plain Python floats.

Uncertainty comes in two flavors, mirroring how the evaluation treats
task scores: proportion-like metrics get a binomial standard error
sqrt(v * (1 - v) / n); correlation metrics get a seeded bootstrap.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import EmbeddingMatrix
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    EmptyTrainSet,
    KTooLarge,
    NoPositives,
    NotUnit,
    UnsupportedMetric,
)
from .rng import stream

SIGMA_FLOOR = 1e-6

# Metrics whose value is a [0, 1] rate over n items.
_PROPORTION_METRICS = {"accuracy", "macro_f1", "ap", "v_measure", "bitext_f1"}


@dataclass(frozen=True)
class TaskScore:
    metric: str
    value: float
    n: int
    sigma: float


@dataclass(frozen=True)
class RankedList:
    """Documents ranked for one query, best first.

    Scores must be non-increasing and equal-score runs must be ordered
    by ascending doc id, which from_scores guarantees.
    """

    query_id: str
    doc_ids: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.doc_ids) != len(self.scores):
            raise ValueError("doc_ids and scores length mismatch")
        for i in range(1, len(self.scores)):
            if self.scores[i] > self.scores[i - 1]:
                raise ValueError("scores must be non-increasing")
            if self.scores[i] == self.scores[i - 1] and self.doc_ids[i] <= self.doc_ids[i - 1]:
                raise ValueError("tied scores must be ordered by ascending doc id")

    @classmethod
    def from_scores(cls, query_id: str, doc_ids, scores) -> "RankedList":
        pairs = sorted(zip(doc_ids, scores), key=lambda p: (-p[1], p[0]))
        return cls(
            query_id=query_id,
            doc_ids=tuple(p[0] for p in pairs),
            scores=tuple(float(p[1]) for p in pairs),
        )


def ndcg_at_k(ranked: RankedList, relevance: dict, k: int) -> float:
    """nDCG@k with gain = grade and discount 1 / log2(rank + 1).

    The ideal DCG ranks all relevant documents, retrieved or not, and
    truncates at k.  Queries with no relevant documents score 0.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for rank, doc_id in enumerate(ranked.doc_ids[:k], start=1):
        grade = float(relevance.get(doc_id, 0.0))
        if grade != 0.0:
            dcg += grade / math.log2(rank + 1)
    ideal = sorted((float(g) for g in relevance.values() if g > 0), reverse=True)
    idcg = 0.0
    for rank, grade in enumerate(ideal[:k], start=1):
        idcg += grade / math.log2(rank + 1)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def knn_classify(
    train: EmbeddingMatrix,
    train_labels,
    test: EmbeddingMatrix,
    test_labels,
    k: int = 10,
) -> tuple[float, float, list[bool]]:
    """Cosine k-nearest-neighbor vote.

    Neighbors rank by (similarity desc, train id asc).  A tied vote
    falls back to summed similarity, then to the smallest label.
    Returns (accuracy, macro F1 over the train label set, per-item
    correctness flags).
    """
    train_labels = list(train_labels)
    test_labels = list(test_labels)
    if train.count == 0:
        raise EmptyTrainSet("no training rows")
    if train.dim != test.dim:
        raise DimensionMismatch(f"train dim {train.dim} vs test dim {test.dim}")
    if len(train_labels) != train.count or len(test_labels) != test.count:
        raise ValueError("label count does not match matrix count")
    if not 1 <= k <= train.count:
        raise KTooLarge(f"k={k} outside [1, {train.count}]")

    sims = test.rows.astype(np.float64) @ train.rows.astype(np.float64).T
    train_ids = np.asarray(train.ids)
    correct: list[bool] = []
    predictions = []
    for i in range(test.count):
        order = np.lexsort((train_ids, -sims[i]))[:k]
        votes: Counter = Counter()
        sim_sum: dict = {}
        for j in order:
            lab = train_labels[j]
            votes[lab] += 1
            sim_sum[lab] = sim_sum.get(lab, 0.0) + float(sims[i, j])
        winner = min(votes, key=lambda lab: (-votes[lab], -sim_sum[lab], lab))
        predictions.append(winner)
        correct.append(winner == test_labels[i])

    accuracy = sum(correct) / len(correct) if correct else 0.0
    classes = sorted(set(train_labels))
    f1_total = 0.0
    for cls in classes:
        tp = sum(1 for p, g in zip(predictions, test_labels) if p == cls and g == cls)
        fp = sum(1 for p, g in zip(predictions, test_labels) if p == cls and g != cls)
        fn = sum(1 for p, g in zip(predictions, test_labels) if p != cls and g == cls)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1_total += 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    macro_f1 = f1_total / len(classes) if classes else 0.0
    return accuracy, macro_f1, correct


def average_ranks(values) -> np.ndarray:
    """1-based ranks, ties averaged (half-integers, exact in float64)."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    n = len(v)
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatch(f"mismatched inputs {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise DegenerateInput("need at least 2 pairs")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("non-finite values in correlation input")
    if x.min() == x.max() or y.min() == y.max():
        raise DegenerateInput("constant list has no rank correlation")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxy = float((dx * dy).sum())
    sxx = float((dx * dx).sum())
    syy = float((dy * dy).sum())
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("constant ranks")
    return sxy / math.sqrt(sxx * syy)


def _kmeans_once(rows64: np.ndarray, k: int, rng, max_iter: int) -> tuple[np.ndarray, float]:
    n = rows64.shape[0]
    init = rng.choice(n, size=k, replace=False)
    centroids = rows64[init].copy()
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        sims = rows64 @ centroids.T
        new_assign = sims.argmax(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = rows64[assign == c]
            if members.shape[0] == 0:
                continue  # empty cluster keeps its previous centroid
            m = members.mean(axis=0)
            norm = np.sqrt((m * m).sum())
            if norm > 1e-12:
                centroids[c] = m / norm
    sims = rows64 @ centroids.T
    objective = float(sims[np.arange(n), assign].sum())
    return assign, objective


def _conditional_entropy(outer_counts: dict, joint: dict, n: int) -> float:
    """H(inner | outer) from joint counts keyed (outer, inner), sorted order."""
    h = 0.0
    for outer_key in sorted(outer_counts):
        n_outer = outer_counts[outer_key]
        inner_keys = sorted(i for (o, i) in joint if o == outer_key)
        for inner_key in inner_keys:
            c = joint[(outer_key, inner_key)]
            if c > 0:
                h -= (c / n) * math.log(c / n_outer)
    return h


def _entropy(counts: dict, n: int) -> float:
    h = 0.0
    for key in sorted(counts):
        c = counts[key]
        if c > 0:
            h -= (c / n) * math.log(c / n)
    return h


def v_measure(gold_labels, assignments) -> float:
    """V-measure with natural-log entropies."""
    gold = list(gold_labels)
    assign = list(assignments)
    if len(gold) != len(assign) or not gold:
        raise DimensionMismatch("labels and assignments must have equal nonzero length")
    n = len(gold)
    class_counts = Counter(gold)
    cluster_counts = Counter(assign)
    joint = Counter(zip(assign, gold))  # keyed (cluster, class)
    h_c = _entropy(class_counts, n)
    h_k = _entropy(cluster_counts, n)
    h_c_given_k = _conditional_entropy(cluster_counts, joint, n)
    joint_ck = Counter(zip(gold, assign))
    h_k_given_c = _conditional_entropy(class_counts, joint_ck, n)
    homogeneity = 1.0 if h_c == 0.0 else 1.0 - h_c_given_k / h_c
    completeness = 1.0 if h_k == 0.0 else 1.0 - h_k_given_c / h_k
    if homogeneity + completeness == 0.0:
        return 0.0
    return 2 * homogeneity * completeness / (homogeneity + completeness)


def spherical_kmeans_vmeasure(
    items: EmbeddingMatrix,
    gold_labels,
    k: int,
    restarts: int = 4,
    seed: int = 0,
    max_iter: int = 100,
) -> tuple[float, np.ndarray]:
    """Cluster unit vectors by cosine and score against gold labels.

    Centroid update is mean-then-renormalize; the best of `restarts`
    seeded inits by within-cluster cosine wins, first restart on ties.
    Returns (v_measure, assignments).
    """
    gold = list(gold_labels)
    if len(gold) != items.count:
        raise DimensionMismatch("one gold label per item required")
    if k > items.count:
        raise KTooLarge(f"k={k} exceeds item count {items.count}")
    if k != len(set(gold)):
        raise ValueError(f"k={k} must equal the number of distinct gold labels ({len(set(gold))})")
    if not items.normalized:
        raise NotUnit("spherical k-means expects unit rows")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rows64 = items.rows.astype(np.float64)
    best_assign = None
    best_objective = -math.inf
    for r in range(restarts):
        assign, objective = _kmeans_once(rows64, k, stream(seed, r), max_iter)
        if objective > best_objective:
            best_objective = objective
            best_assign = assign
    return v_measure(gold, best_assign), best_assign


def pair_average_precision(scores, labels) -> float:
    """Average precision over pairs ranked by score, ties by input index."""
    scores = list(scores)
    labels = list(labels)
    if len(scores) != len(labels) or not scores:
        raise DimensionMismatch("scores and labels must have equal nonzero length")
    total_pos = sum(1 for lab in labels if lab)
    if total_pos == 0:
        raise NoPositives("no positive pairs")
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    hits = 0
    ap = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            ap += hits / rank
    return ap / total_pos


def bitext_f1(
    left: EmbeddingMatrix,
    right: EmbeddingMatrix,
    gold_pairs,
) -> tuple[float, float, float]:
    """Mutual-nearest-neighbor mining scored as F1 against gold pairs.

    A pair (i, j) is predicted when j is i's best match and i is j's.
    Argmax ties resolve to the lowest index.
    """
    if left.dim != right.dim:
        raise DimensionMismatch(f"left dim {left.dim} vs right dim {right.dim}")
    gold = set()
    for i, j in gold_pairs:
        if not (0 <= i < left.count and 0 <= j < right.count):
            raise ValueError(f"gold pair ({i}, {j}) out of range")
        gold.add((int(i), int(j)))
    if left.count == 0 or right.count == 0:
        return 0.0, 0.0, 0.0
    sims = left.rows.astype(np.float64) @ right.rows.astype(np.float64).T
    fwd = sims.argmax(axis=1)
    bwd = sims.argmax(axis=0)
    predicted = {(i, int(fwd[i])) for i in range(left.count) if int(bwd[fwd[i]]) == i}
    hit = len(predicted & gold)
    precision = hit / len(predicted) if predicted else 0.0
    recall = hit / len(gold) if gold else 0.0
    if precision + recall == 0.0:
        return 0.0, precision, recall
    return 2 * precision * recall / (precision + recall), precision, recall


def sigma_for(
    metric: str,
    value: float,
    n: int,
    pairs: np.ndarray | None = None,
    seed: int = 0,
    n_boot: int = 200,
) -> float:
    """Standard error stand-in for a task score.

    Proportion-like metrics use the binomial formula on n items.
    Spearman uses a seeded bootstrap over the supplied (x, y) pairs.
    Both are clipped below at 1e-6 so downstream z-scores stay finite.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    name = metric.lower()
    if name in _PROPORTION_METRICS or name.startswith("ndcg@"):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"proportion-like metric {metric} outside [0, 1]: {value}")
        return max(math.sqrt(value * (1.0 - value) / n), SIGMA_FLOOR)
    if name == "spearman":
        if pairs is None:
            raise ValueError("spearman sigma needs the per-item (x, y) pairs")
        pts = np.asarray(pairs, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] != n:
            raise DimensionMismatch(f"expected ({n}, 2) pairs, got {pts.shape}")
        rng = stream(seed, 0)
        stats = []
        for _ in range(n_boot):
            idx = rng.integers(0, n, size=n)
            xs = pts[idx, 0]
            ys = pts[idx, 1]
            if xs.min() == xs.max() or ys.min() == ys.max():
                continue  # degenerate resample carries no rank information
            stats.append(spearman(xs, ys))
        if len(stats) < 2:
            return SIGMA_FLOOR
        return max(float(np.std(stats, ddof=1)), SIGMA_FLOOR)
    raise UnsupportedMetric(f"no uncertainty model for metric {metric!r}")
