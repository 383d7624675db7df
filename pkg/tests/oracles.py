"""Slow, obviously-correct reference implementations used by the tests."""

import itertools
import math
from fractions import Fraction


def dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def all_triplets(labels):
    n = len(labels)
    return [(q, p, m) for q, p, m in itertools.product(range(n), repeat=3)
            if q != p and labels[q] == labels[p] and labels[q] != labels[m]]


def brute_force_mine(emb, labels, queries, n_per):
    """Farthest positives paired with closest negatives, ties by lower index."""
    out = []
    for q in queries:
        d = [dist(emb[i], emb[q]) for i in range(len(emb))]
        pos = sorted((i for i in range(len(emb)) if i != q and labels[i] == labels[q]),
                     key=lambda i: (-d[i], i))[:n_per]
        neg = sorted((i for i in range(len(emb)) if labels[i] != labels[q]),
                     key=lambda i: (d[i], i))[:n_per]
        out.extend((q, p, m) for p, m in zip(pos, neg))
    return out


def oracle_knn(g_ids, g_vec, g_lab, q_vec, k):
    preds = []
    for q in q_vec:
        ranked = sorted(range(len(g_ids)), key=lambda i: (dist(q, g_vec[i]), g_ids[i]))[:k]
        votes, sums = {}, {}
        for i in ranked:
            votes[g_lab[i]] = votes.get(g_lab[i], 0) + 1
            sums[g_lab[i]] = sums.get(g_lab[i], 0.0) + dist(q, g_vec[i])
        best = max(votes.values())
        preds.append(min((sums[c], c) for c in votes if votes[c] == best)[1])
    return preds


def oracle_ap(rel):
    hits, total = 0, Fraction(0)
    for r, x in enumerate(rel, start=1):
        if x:
            hits += 1
            total += Fraction(hits, r)
    return total / hits


def oracle_map(g_ids, g_vec, g_lab, q_ids, q_vec, q_lab):
    aps = []
    for qi, q in enumerate(q_vec):
        items = [i for i in range(len(g_ids)) if g_ids[i] != q_ids[qi]]
        items.sort(key=lambda i: (dist(q, g_vec[i]), g_ids[i]))
        aps.append(oracle_ap([g_lab[i] == q_lab[qi] for i in items]))
    return float(sum(aps) / len(aps))
