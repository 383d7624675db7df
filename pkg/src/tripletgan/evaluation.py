"""k-NN accuracy and mean average precision over embedding sets.

Both metrics use exact Euclidean distances from a brute-force scan.
Equal distances are ordered by the lower gallery id, so results are
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, DimensionError
from .networks import embed

DEFAULT_K = 9
_CHUNK = 256


@dataclass
class EmbeddingSet:
    ids: np.ndarray
    vectors: np.ndarray
    labels: np.ndarray | None = None
    source: str = "gallery"

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            self.vectors = self.vectors.reshape(len(self.ids), -1)
        if len(self.vectors) != len(self.ids):
            raise ContractError(f"{len(self.ids)} ids but {len(self.vectors)} vectors")
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(np.unique(self.ids)) != len(self.ids):
            raise ContractError("embedding ids must be unique")

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.vectors.shape[1]


@dataclass
class EvalReport:
    accuracy: float | None
    map: float | None
    k: int
    M: int
    N: int
    per_class: dict = field(default_factory=dict)
    seed: int | None = None
    config_fingerprint: str | None = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def embed_dataset(params, ds, rows=None, source="gallery", batch=4096):
    """Embed the rows of ``ds`` (all, or the given indices) in order."""
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows, dtype=np.int64)
    m = params.spec.feature_dim
    if ds.dim != params.spec.input_dim:
        raise DimensionError(f"data dim {ds.dim} != embedder input_dim {params.spec.input_dim}")
    frozen = params.frozen()
    chunks = [embed(frozen, ds.features[rows[i:i + batch]]).data
              for i in range(0, len(rows), batch)]
    vectors = np.concatenate(chunks) if chunks else np.empty((0, m))
    labels = None if ds.labels is None else ds.labels[rows]
    return EmbeddingSet(rows, vectors, labels, source)


def _distance_block(queries, gallery):
    diff = queries[:, None, :] - gallery[None, :, :]
    return np.sqrt(np.einsum("qgm,qgm->qg", diff, diff))


def _ranked(dist_row, gallery_ids):
    # primary key distance, then gallery id
    return np.lexsort((gallery_ids, dist_row))


def _check_pair(gallery, queries):
    if len(gallery) == 0:
        raise ContractError("gallery is empty")
    if gallery.labels is None:
        raise ContractError("gallery needs labels")
    if len(queries) and queries.dim != gallery.dim:
        raise DimensionError(f"query dim {queries.dim} != gallery dim {gallery.dim}")


def knn_predict(gallery, queries, k=DEFAULT_K):
    """Majority vote of the k nearest gallery items.

    Vote ties go to the class with the smaller summed distance over its
    voters, then to the lower class id.
    """
    _check_pair(gallery, queries)
    if k < 1 or k > len(gallery):
        raise ContractError(f"k={k} must lie in [1, {len(gallery)}] (gallery size)")
    n_classes = int(gallery.labels.max()) + 1
    preds = np.empty(len(queries), dtype=np.int64)
    for start in range(0, len(queries), _CHUNK):
        block = _distance_block(queries.vectors[start:start + _CHUNK], gallery.vectors)
        for j, row in enumerate(block):
            nn = _ranked(row, gallery.ids)[:k]
            votes = np.bincount(gallery.labels[nn], minlength=n_classes)
            dsum = np.bincount(gallery.labels[nn], weights=row[nn], minlength=n_classes)
            tied = np.flatnonzero(votes == votes.max())
            # stable sort: equal summed distances keep the lower class id
            preds[start + j] = tied[np.argsort(dsum[tied], kind="stable")[0]]
    return preds


def knn_classify(gallery, queries, k=DEFAULT_K):
    """Predicted labels and accuracy against ``queries.labels``."""
    preds = knn_predict(gallery, queries, k)
    if queries.labels is None or len(queries) == 0:
        return preds, None
    return preds, float(np.mean(preds == queries.labels))


def per_class_accuracy(preds, labels):
    return {int(c): float(np.mean(preds[labels == c] == c)) for c in np.unique(labels)}


def average_precision(relevance):
    """AP of a ranked 0/1 relevance vector: mean precision at each relevant rank."""
    relevance = np.asarray(relevance, dtype=bool)
    if not relevance.any():
        raise ContractError("no relevant items")
    hits = np.cumsum(relevance)
    ranks = np.flatnonzero(relevance) + 1
    return float(np.mean(hits[relevance] / ranks))


def mean_average_precision(gallery, queries):
    """Mean over queries of AP of the full distance-ranked gallery.

    A gallery item sharing the query's id is skipped, so a set can be
    scored against itself.
    """
    _check_pair(gallery, queries)
    if queries.labels is None:
        raise ContractError("queries need labels")
    present = set(gallery.labels.tolist())
    missing = set(queries.labels.tolist()) - present
    if missing:
        raise ContractError(f"classes {sorted(missing)} absent from gallery")
    if len(queries) == 0:
        return None
    aps = np.empty(len(queries))
    for start in range(0, len(queries), _CHUNK):
        block = _distance_block(queries.vectors[start:start + _CHUNK], gallery.vectors)
        for j, row in enumerate(block):
            qi = start + j
            order = _ranked(row, gallery.ids)
            order = order[gallery.ids[order] != queries.ids[qi]]
            aps[qi] = average_precision(gallery.labels[order] == queries.labels[qi])
    return float(aps.mean())


def evaluate_sets(gallery, queries, k=DEFAULT_K, metrics="both"):
    acc = map_ = None
    per_class = {}
    if metrics in ("knn", "both"):
        preds, acc = knn_classify(gallery, queries, k)
        per_class = per_class_accuracy(preds, queries.labels)
    if metrics in ("map", "both"):
        map_ = mean_average_precision(gallery, queries)
    return EvalReport(acc, map_, k, gallery.dim, len(gallery), per_class)


def evaluate(params, train, test, k=DEFAULT_K, metrics="both", seed=None,
             config_fingerprint=None):
    """Gallery = labeled training rows, queries = every test row."""
    gallery = embed_dataset(params, train, train.labeled_indices, "train_labeled")
    queries = embed_dataset(params, test, source="test")
    report = evaluate_sets(gallery, queries, k, metrics)
    report.seed = seed
    report.config_fingerprint = config_fingerprint
    return report


# ---------------------------------------------------------------------------
# CSV


def write_embeddings_csv(es, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "label"] + [f"f{i}" for i in range(es.dim)])
        for i in range(len(es)):
            lab = "" if es.labels is None or es.labels[i] < 0 else int(es.labels[i])
            w.writerow([int(es.ids[i]), lab] + [repr(float(v)) for v in es.vectors[i]])


def read_embeddings_csv(path, source="gallery"):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:2] != ["id", "label"]:
        raise ContractError(f"{path}: missing 'id,label,f0,...' header")
    dim = len(rows[0]) - 2
    body = rows[1:]
    ids = np.empty(len(body), dtype=np.int64)
    labels = np.full(len(body), -1, dtype=np.int64)
    vectors = np.empty((len(body), dim))
    for i, row in enumerate(body):
        if len(row) != dim + 2:
            raise ContractError(f"{path}: row {i + 1} has {len(row)} fields, expected {dim + 2}")
        try:
            ids[i] = int(row[0])
            if row[1] == "":
                raise ContractError(f"{path}: row {i + 1} has no label")
            labels[i] = int(row[1])
            vectors[i] = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ContractError(f"{path}: row {i + 1}: {exc}") from exc
    return EmbeddingSet(ids, vectors, labels, source)
