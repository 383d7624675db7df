"""Datasets: MNIST IDX files, synthetic Gaussian blobs, CSV round-trips and
class-balanced labeled subsets. Features always live in [-1, 1]."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadMagicError, ContractError, CountMismatchError, TruncatedFileError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    labeled_mask: np.ndarray | None = None
    split: str = "train"
    provenance: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ContractError(f"features must be 2-D, got shape {self.features.shape}")
        n = len(self.features)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ContractError("labels must have one entry per row")
        if self.labeled_mask is None:
            self.labeled_mask = (np.ones(n, dtype=bool) if self.labels is not None
                                 else np.zeros(n, dtype=bool))
        self.labeled_mask = np.asarray(self.labeled_mask, dtype=bool)
        if self.labeled_mask.any() and (self.labels is None
                                        or np.any(self.labels[self.labeled_mask] < 0)):
            raise ContractError("labeled rows must carry a class id")

    def __len__(self):
        return len(self.features)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def labeled_indices(self):
        return np.flatnonzero(self.labeled_mask)

    @property
    def num_labeled(self):
        return int(self.labeled_mask.sum())

    @property
    def num_classes(self):
        return 0 if self.labels is None else int(self.labels.max()) + 1

    def labeled_part(self):
        idx = self.labeled_indices
        return LabeledDataset(self.features[idx], self.labels[idx], split=self.split,
                              provenance=f"{self.provenance} [labeled subset]")


# ---------------------------------------------------------------------------
# IDX


def _read_header(buf, n_dims, path):
    need = 4 + 4 * n_dims
    if len(buf) < need:
        raise TruncatedFileError(f"{path}: header shorter than {need} bytes")
    magic = struct.unpack(">I", buf[:4])[0]
    dims = struct.unpack(f">{n_dims}I", buf[4:need])
    return magic, dims, need


def load_idx(images_path, labels_path, split="train"):
    """Parse an IDX image/label file pair into a dataset scaled to [-1, 1]."""
    with open(images_path, "rb") as f:
        img = f.read()
    with open(labels_path, "rb") as f:
        lab = f.read()

    magic = struct.unpack(">I", img[:4])[0] if len(img) >= 4 else None
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"{images_path}: image magic {magic!r} != 0x00000803")
    magic = struct.unpack(">I", lab[:4])[0] if len(lab) >= 4 else None
    if magic != IDX_LABEL_MAGIC:
        raise BadMagicError(f"{labels_path}: label magic {magic!r} != 0x00000801")

    _, (count, rows, cols), off = _read_header(img, 3, images_path)
    _, (n_labels,), loff = _read_header(lab, 1, labels_path)
    if count != n_labels:
        raise CountMismatchError(f"{count} images but {n_labels} labels")
    if len(img) - off < count * rows * cols:
        raise TruncatedFileError(f"{images_path}: pixel payload truncated")
    if len(lab) - loff < count:
        raise TruncatedFileError(f"{labels_path}: label payload truncated")

    pixels = np.frombuffer(img, dtype=np.uint8, count=count * rows * cols, offset=off)
    labels = np.frombuffer(lab, dtype=np.uint8, count=count, offset=loff).astype(np.int64)
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 127.5 - 1.0
    return LabeledDataset(features, labels, split=split,
                          provenance=f"idx:{images_path}",
                          extra={"image_shape": (rows, cols)})


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (n, rows, cols) and labels (n,) as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, len(labels)))
        f.write(labels.tobytes())


# ---------------------------------------------------------------------------
# synthetic blobs


def blob_centers(classes, dim, scale):
    """Class centers on the sphere of radius ``scale``.

    Up to ``2*dim`` classes sit on signed coordinate axes (+e0, +e1, ...,
    then -e0, ...). Beyond that, directions come from a fixed-seed Gaussian.
    Centers never depend on the sampling seed, so train/test draws agree.
    """
    if classes <= 2 * dim:
        centers = np.zeros((classes, dim))
        for c in range(classes):
            centers[c, c % dim] = 1.0 if c < dim else -1.0
    else:
        centers = np.random.default_rng(0).standard_normal((classes, dim))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    return centers * scale


def make_blobs(classes, per_class, dim, centers_scale=0.8, noise_sigma=0.1, seed=0,
               split="train"):
    if classes < 2:
        raise ContractError(f"classes must be >= 2, got {classes}")
    if per_class < 1:
        raise ContractError(f"per_class must be >= 1, got {per_class}")
    if dim < 1:
        raise ContractError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    centers = blob_centers(classes, dim, centers_scale)
    labels = np.repeat(np.arange(classes), per_class)
    noise = rng.standard_normal((len(labels), dim)) * noise_sigma
    features = np.clip(centers[labels] + noise, -1.0, 1.0)
    return LabeledDataset(
        features, labels, split=split,
        provenance=(f"blobs(classes={classes}, per_class={per_class}, dim={dim}, "
                    f"scale={centers_scale}, sigma={noise_sigma}, seed={seed})"))


def select_labeled_subset(ds, per_class_count=None, seed=0, total=None):
    """Keep a class-balanced labeled subset; rows are never dropped, only unmasked.

    Give either ``per_class_count`` (exactly that many per class) or
    ``total``; a total that does not divide evenly gives the lowest class
    ids one extra example each.
    """
    if ds.labels is None:
        raise ContractError("dataset has no labels")
    if (per_class_count is None) == (total is None):
        raise ContractError("give exactly one of per_class_count / total")
    n_classes = ds.num_classes
    if total is not None:
        base, extra = divmod(int(total), n_classes)
        quota = [base + (c < extra) for c in range(n_classes)]
    else:
        quota = [int(per_class_count)] * n_classes
    rng = np.random.default_rng(seed)
    mask = np.zeros(len(ds), dtype=bool)
    for c in range(n_classes):
        members = np.flatnonzero((ds.labels == c) & ds.labeled_mask)
        if len(members) < quota[c]:
            raise ContractError(
                f"class {c} has {len(members)} labeled rows, fewer than {quota[c]}")
        mask[rng.choice(members, size=quota[c], replace=False)] = True
    return replace(ds, labeled_mask=mask)


# ---------------------------------------------------------------------------
# CSV


def write_csv(ds, path):
    """``label,f0,...,f{D-1}``; unlabeled rows get an empty label field."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label"] + [f"f{i}" for i in range(ds.dim)])
        for i, row in enumerate(ds.features):
            lab = ds.labels[i] if ds.labeled_mask[i] else ""
            w.writerow([lab] + [repr(float(v)) for v in row])


def read_csv(path, split="train"):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:1] != ["label"]:
        raise ContractError(f"{path}: missing 'label,f0,...' header")
    dim = len(rows[0]) - 1
    body = rows[1:]
    features = np.empty((len(body), dim))
    labels = np.full(len(body), -1, dtype=np.int64)
    for i, row in enumerate(body):
        if len(row) != dim + 1:
            raise ContractError(f"{path}: row {i + 1} has {len(row)} fields, expected {dim + 1}")
        try:
            if row[0] != "":
                labels[i] = int(row[0])
            features[i] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ContractError(f"{path}: row {i + 1}: {exc}") from exc
    mask = labels >= 0
    return LabeledDataset(features, labels if mask.any() else None, mask, split=split,
                          provenance=f"csv:{path}")
