"""
Where triplets come from
========================

Random triplets are drawn uniformly from every valid
(query, positive, negative) combination. Hard mining instead takes the
current embedding, picks K queries and pairs each query's farthest
positives with its closest negatives.
"""

import numpy as np

from tripletgan.sampling import (
    MiningConfig,
    enumerate_triplet_count,
    mine_hard_triplets,
    sample_random_triplets,
)

# How many triplets exist? Each query has (n_c - 1) positives and (n - n_c) negatives.
labels = np.repeat(np.arange(10), 10)
print("10 classes x 10 examples:", enumerate_triplet_count(labels), "triplets")

# Uniform sampling over the valid set, with replacement.
small = np.array([0, 0, 1, 1])
batch = sample_random_triplets(small, 8, seed=0)
print("random triplets on", small.tolist())
print(batch.triples)

# Hard mining on a 1-D embedding. Class 0 sits at 0, 0.5 and 0.9, class 1 at
# 0.2, 0.6 and 1.5. For query 0 the farthest positive is 0.9 and the closest
# negative is 0.2, so query 0 should yield (0, 2, 3) and then (0, 1, 4).
emb = np.array([[0.0], [0.5], [0.9], [0.2], [0.6], [1.5]])
lab = np.array([0, 0, 0, 1, 1, 1])
mined = mine_hard_triplets(emb, lab, MiningConfig(K=6, N=2), seed=0)
for q, p, n in mined.triples:
    print(f"query {q} ({emb[q, 0]:.1f})  pos {p} ({emb[p, 0]:.1f})  neg {n} ({emb[n, 0]:.1f})")

# Asking for more than the data can give is refused up front.
try:
    mine_hard_triplets(emb, lab, MiningConfig(K=2, N=3), seed=0)
except ValueError as exc:
    print("refused:", exc)
