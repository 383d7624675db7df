"""Triplet construction (uniform random and hard-mined) and generator noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, MiningConfigError
from .tensor import Tensor


@dataclass
class TripletBatch:
    """Index triples ``(query, positive, negative)`` into some labeled array."""

    triples: np.ndarray
    provenance: str = "random"

    def __post_init__(self):
        self.triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)

    def __len__(self):
        return len(self.triples)

    @property
    def query(self):
        return self.triples[:, 0]

    @property
    def positive(self):
        return self.triples[:, 1]

    @property
    def negative(self):
        return self.triples[:, 2]

    def remap(self, index):
        """Translate indices through ``index`` (e.g. labeled-subset -> dataset rows)."""
        return TripletBatch(np.asarray(index)[self.triples], self.provenance)


@dataclass(frozen=True)
class MiningConfig:
    K: int
    N: int
    refresh: str = "per_epoch"

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise MiningConfigError(f"K and N must be >= 1 (K={self.K}, N={self.N})")
        if self.refresh != "per_epoch":
            raise MiningConfigError(f"unsupported refresh {self.refresh!r}")


def check_triplets(batch, labels):
    """True iff every triple is (same class, different class, no self-positive)."""
    labels = np.asarray(labels)
    t = batch.triples
    if len(t) == 0:
        return True
    if t.min() < 0 or t.max() >= len(labels):
        return False
    q, p, n = labels[t[:, 0]], labels[t[:, 1]], labels[t[:, 2]]
    return bool(np.all(q == p) & np.all(q != n) & np.all(t[:, 0] != t[:, 1]))


def _class_sizes(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1 or len(labels) == 0:
        raise ContractError("labels must be a nonempty 1-D array")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if len(classes) < 2:
        raise ContractError("need at least two classes to form a negative")
    if counts.min() < 2:
        raise ContractError("every class needs at least two labeled members to form a positive")
    return inverse, counts


def triplets_per_query(labels):
    """Number of valid (positive, negative) pairs for each query row."""
    inverse, counts = _class_sizes(labels)
    n_c = counts[inverse]
    return (n_c - 1) * (len(inverse) - n_c)


def enumerate_triplet_count(labels):
    """Size of the valid triplet set: sum over queries of (n_c - 1)(n - n_c)."""
    return int(triplets_per_query(labels).sum())


def sample_random_triplets(labels, count, seed):
    """``count`` triples drawn uniformly, with replacement, from the valid set.

    A query is drawn with probability proportional to its number of valid
    (positive, negative) pairs, then one positive and one negative are drawn
    uniformly; the product is uniform over triples.
    """
    labels = np.asarray(labels)
    weights = triplets_per_query(labels).astype(np.float64)
    rng = np.random.default_rng(seed)
    if count < 0:
        raise ContractError("count must be >= 0")

    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    classes, starts, sizes = np.unique(sorted_labels, return_index=True, return_counts=True)
    cls_of = np.searchsorted(classes, labels)

    q = rng.choice(len(labels), size=count, p=weights / weights.sum())
    c = cls_of[q]
    # position of q inside its class block, so the positive can skip it
    rank_in_class = np.empty(len(labels), dtype=np.int64)
    rank_in_class[order] = np.arange(len(labels)) - starts[np.searchsorted(classes, sorted_labels)]

    j = rng.integers(0, sizes[c] - 1)
    j = j + (j >= rank_in_class[q])
    pos = order[starts[c] + j]

    # negatives: uniform over the rows outside the block of class c
    n_out = len(labels) - sizes[c]
    k = rng.integers(0, n_out)
    k = k + np.where(k >= starts[c], sizes[c], 0)
    neg = order[k]
    return TripletBatch(np.stack([q, pos, neg], axis=1), "random")


def _validate_mining(labels, cfg):
    labels = np.asarray(labels)
    _, counts = _class_sizes(labels)
    n = len(labels)
    if cfg.K > n:
        raise MiningConfigError(f"K={cfg.K} exceeds the {n} labeled examples")
    if cfg.N > counts.min() - 1:
        raise MiningConfigError(
            f"N={cfg.N} exceeds (min class size - 1) = {counts.min() - 1}")
    if cfg.N > n - counts.max():
        raise MiningConfigError(
            f"N={cfg.N} exceeds the labeled examples outside the largest class ({n - counts.max()})")


def mine_hard_triplets(embeddings, labels, cfg, seed):
    """Hard triplets from the current embedding of the labeled set.

    For each of K queries (uniform without replacement) the N farthest
    same-class examples are paired, rank for rank, with the N closest
    other-class examples. Distance ties go to the lower index. Indices
    refer to rows of ``embeddings``/``labels``.
    """
    emb = np.asarray(embeddings.data if isinstance(embeddings, Tensor) else embeddings,
                     dtype=np.float64)
    labels = np.asarray(labels)
    if emb.ndim != 2 or emb.shape[0] != len(labels):
        raise ContractError(f"embeddings {emb.shape} do not match {len(labels)} labels")
    _validate_mining(labels, cfg)

    rng = np.random.default_rng(seed)
    queries = rng.choice(len(labels), size=cfg.K, replace=False)
    idx = np.arange(len(labels))
    out = np.empty((cfg.K * cfg.N, 3), dtype=np.int64)
    for i, q in enumerate(queries):
        dist = np.sqrt(np.sum((emb - emb[q]) ** 2, axis=1))
        same = (labels == labels[q]) & (idx != q)
        other = labels != labels[q]
        pos_idx, neg_idx = idx[same], idx[other]
        # lexsort: last key is primary
        pos = pos_idx[np.lexsort((pos_idx, -dist[same]))[:cfg.N]]
        neg = neg_idx[np.lexsort((neg_idx, dist[other]))[:cfg.N]]
        block = out[i * cfg.N:(i + 1) * cfg.N]
        block[:, 0] = q
        block[:, 1] = pos
        block[:, 2] = neg
    return TripletBatch(out, "mined")


def sample_noise(batch, noise_dim, seed):
    """i.i.d. uniform(-1, 1) generator inputs."""
    if batch < 0:
        raise ContractError("batch must be >= 0")
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=(batch, noise_dim))
    # uniform() is [low, high); keep the open interval on both ends
    z[z == -1.0] = 0.0
    return Tensor(z)
