"""Brute-force reference metrics used by the equivalence tests.

Each function here re-derives its metric from the definition with
plain loops and dicts, no shared code with the library.  Two things
are deliberately pinned to the library's documented contract so that
"equal" can mean bit-equal rather than approximately equal:

* reductions run sequentially in rank order (or sorted key order),
  which is the order the library documents;
* final formula shapes match the documented ones (for example
  sxy / sqrt(sxx * syy) for the rank correlation), since a / sqrt(b)
  and a / (sqrt(b1) * sqrt(b2)) round differently.

Similarity matrices are computed by the caller and passed in, so the
reference implementations only re-derive the decision logic built on
top of them (ranking, tie breaks, votes, mutual matches).
"""

import math


def oracle_ndcg(doc_ids, scores, relevance, k):
    """DCG over the top k of the ranked list divided by the ideal DCG."""
    ranked = sorted(zip(doc_ids, scores), key=lambda p: (-p[1], p[0]))
    dcg = 0.0
    rank = 0
    for doc_id, _ in ranked[:k]:
        rank += 1
        grade = float(relevance.get(doc_id, 0.0))
        if grade != 0.0:
            dcg += grade / math.log2(rank + 1)
    best_grades = sorted((float(g) for g in relevance.values() if g > 0), reverse=True)
    idcg = 0.0
    for rank, grade in enumerate(best_grades[:k], start=1):
        idcg += grade / math.log2(rank + 1)
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def oracle_knn(sims, train_ids, train_labels, test_labels, k):
    """k-NN vote from a precomputed similarity matrix.

    Neighbor order: similarity descending, then train id ascending.
    Vote ties: larger summed similarity, then smaller label.
    """
    n_test = len(test_labels)
    n_train = len(train_labels)
    predictions = []
    for i in range(n_test):
        neighbor_rank = sorted(range(n_train), key=lambda j: (-sims[i][j], train_ids[j]))
        votes = {}
        sim_sum = {}
        for j in neighbor_rank[:k]:
            lab = train_labels[j]
            votes[lab] = votes.get(lab, 0) + 1
            sim_sum[lab] = sim_sum.get(lab, 0.0) + float(sims[i][j])
        best = None
        for lab in votes:
            key = (-votes[lab], -sim_sum[lab], lab)
            if best is None or key < best[0]:
                best = (key, lab)
        predictions.append(best[1])

    correct = [p == g for p, g in zip(predictions, test_labels)]
    accuracy = sum(correct) / len(correct)

    classes = sorted(set(train_labels))
    f1_sum = 0.0
    for cls in classes:
        tp = fp = fn = 0
        for p, g in zip(predictions, test_labels):
            if p == cls and g == cls:
                tp += 1
            elif p == cls:
                fp += 1
            elif g == cls:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall:
            f1_sum += 2 * precision * recall / (precision + recall)
    return accuracy, f1_sum / len(classes)


def _ranks_with_ties(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # 1-based positions i+1 .. j+1 share the average rank
        avg = (i + 1 + j + 1) / 2
        for t in range(i, j + 1):
            ranks[order[t]] = avg
        i = j + 1
    return ranks


def oracle_spearman(x, y):
    rx = _ranks_with_ties(list(x))
    ry = _ranks_with_ties(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    sxy = sxx = syy = 0.0
    for a, b in zip(rx, ry):
        sxy += (a - mx) * (b - my)
        sxx += (a - mx) * (a - mx)
        syy += (b - my) * (b - my)
    return sxy / math.sqrt(sxx * syy)


def oracle_ap(scores, labels):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    total_pos = sum(1 for lab in labels if lab)
    hits = 0
    acc = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            acc += hits / rank
    return acc / total_pos


def oracle_v_measure(gold, assign):
    n = len(gold)
    class_counts = {}
    cluster_counts = {}
    joint = {}
    for g, a in zip(gold, assign):
        class_counts[g] = class_counts.get(g, 0) + 1
        cluster_counts[a] = cluster_counts.get(a, 0) + 1
        joint[(a, g)] = joint.get((a, g), 0) + 1

    def entropy(counts):
        h = 0.0
        for key in sorted(counts):
            c = counts[key]
            h -= (c / n) * math.log(c / n)
        return h

    def conditional(outer_counts, pairs):
        # pairs keyed (outer, inner); iterate sorted outer, sorted inner
        h = 0.0
        for outer in sorted(outer_counts):
            for inner in sorted(i for (o, i) in pairs if o == outer):
                c = pairs[(outer, inner)]
                h -= (c / n) * math.log(c / outer_counts[outer])
        return h

    h_class = entropy(class_counts)
    h_cluster = entropy(cluster_counts)
    h_class_given_cluster = conditional(cluster_counts, joint)
    joint_flipped = {}
    for (a, g), c in joint.items():
        joint_flipped[(g, a)] = c
    h_cluster_given_class = conditional(class_counts, joint_flipped)

    homogeneity = 1.0 if h_class == 0.0 else 1.0 - h_class_given_cluster / h_class
    completeness = 1.0 if h_cluster == 0.0 else 1.0 - h_cluster_given_class / h_cluster
    if homogeneity + completeness == 0.0:
        return 0.0
    return 2 * homogeneity * completeness / (homogeneity + completeness)


def oracle_bitext_f1(sims, gold_pairs):
    """Mutual best match, lowest index on ties, scored as F1."""
    n_left = len(sims)
    n_right = len(sims[0]) if n_left else 0

    def argmax_row(row):
        best = 0
        for j in range(1, len(row)):
            if row[j] > row[best]:
                best = j
        return best

    fwd = [argmax_row(sims[i]) for i in range(n_left)]
    bwd = [argmax_row([sims[i][j] for i in range(n_left)]) for j in range(n_right)]
    predicted = {(i, fwd[i]) for i in range(n_left) if bwd[fwd[i]] == i}
    gold = {(int(i), int(j)) for i, j in gold_pairs}
    hit = len(predicted & gold)
    precision = hit / len(predicted) if predicted else 0.0
    recall = hit / len(gold) if gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
