"""Embedder T(x) and generator G(z) as plain MLPs, plus checkpoint I/O.

The embedder's final linear layer is the feature vector used three ways:
as the triplet embedding, as the discriminator's logits, and as the
statistic the generator matches.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as tn
from .errors import (
    CheckpointVersionError,
    ContractError,
    DimensionError,
    FingerprintError,
    MalformedCheckpointError,
)
from .tensor import Tensor

CHECKPOINT_VERSION = 1
ACTIVATIONS = ("leaky_relu", "relu", "tanh")
OUTPUT_ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class EmbedderSpec:
    input_dim: int
    hidden: tuple = (512, 256)
    feature_dim: int = 16
    activation: str = "leaky_relu"
    alpha: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        _check_widths(self.input_dim, self.hidden, self.feature_dim)
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")

    @property
    def kind(self):
        return "embedder"

    @property
    def widths(self):
        return (self.input_dim, *self.hidden, self.feature_dim)


@dataclass(frozen=True)
class GeneratorSpec:
    noise_dim: int
    output_dim: int
    hidden: tuple = (256, 512)
    output_activation: str = "tanh"
    activation: str = "relu"
    alpha: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        _check_widths(self.noise_dim, self.hidden, self.output_dim)
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ContractError(f"unknown output activation {self.output_activation!r}")
        if self.activation not in ACTIVATIONS:
            raise ContractError(f"unknown activation {self.activation!r}")

    @property
    def kind(self):
        return "generator"

    @property
    def widths(self):
        return (self.noise_dim, *self.hidden, self.output_dim)


def _check_widths(first, hidden, last):
    for w in (first, *hidden, last):
        if int(w) < 1:
            raise ContractError(f"layer widths must be >= 1, got {(first, *hidden, last)}")


def spec_to_dict(spec):
    d = asdict(spec)
    d["hidden"] = list(d["hidden"])
    d["kind"] = spec.kind
    return d


def spec_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    cls = {"embedder": EmbedderSpec, "generator": GeneratorSpec}.get(kind)
    if cls is None:
        raise MalformedCheckpointError(f"unknown network kind {kind!r}")
    return cls(**d)


def fingerprint(spec):
    """Short stable hash of a network spec; checkpoints are bound to it."""
    blob = json.dumps(spec_to_dict(spec), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ModelParams:
    spec: EmbedderSpec | GeneratorSpec
    tensors: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    @property
    def fingerprint(self):
        return fingerprint(self.spec)

    def names(self):
        return list(self.tensors)

    def arrays(self):
        return {k: t.data for k, t in self.tensors.items()}

    def grads(self):
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in self.tensors.items()}

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def frozen(self):
        """Same values, no gradient tracking; used when the other player is trained."""
        return ModelParams(self.spec, {k: Tensor(t.data) for k, t in self.tensors.items()})

    def copy(self):
        return ModelParams(self.spec, {k: Tensor(t.data.copy(), requires_grad=True)
                                       for k, t in self.tensors.items()})

    def equals(self, other):
        return (self.fingerprint == other.fingerprint
                and self.names() == other.names()
                and all(np.array_equal(self.tensors[k].data, other.tensors[k].data)
                        for k in self.tensors))


def init_params(spec, seed):
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    tensors = {}
    widths = spec.widths
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        tensors[f"layer{i}.weight"] = Tensor(w, requires_grad=True)
        tensors[f"layer{i}.bias"] = Tensor(np.zeros(fan_out), requires_grad=True)
    return ModelParams(spec, tensors)


def _activate(h, name, alpha):
    if name == "leaky_relu":
        return tn.leaky_relu(h, alpha)
    if name == "relu":
        return tn.relu(h)
    return tn.tanh(h)


def _mlp(params, x, in_dim):
    spec = params.spec
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise DimensionError(f"expected input of shape (B, {in_dim}), got {x.shape}")
    n_layers = len(spec.widths) - 1
    h = x
    for i in range(n_layers):
        h = h @ params.tensors[f"layer{i}.weight"] + params.tensors[f"layer{i}.bias"]
        if i < n_layers - 1:
            h = _activate(h, spec.activation, spec.alpha)
    return h


def embed(params, x):
    """T(x): B x input_dim -> B x feature_dim."""
    return _mlp(params, x, params.spec.input_dim)


def generate(params, z):
    """G(z): B x noise_dim -> B x output_dim."""
    out = _mlp(params, z, params.spec.noise_dim)
    if params.spec.output_activation == "tanh":
        out = tn.tanh(out)
    return out


# ---------------------------------------------------------------------------
# checkpoints


def params_to_dict(params):
    return {
        "version": params.version,
        "fingerprint": params.fingerprint,
        "spec": spec_to_dict(params.spec),
        "params": {
            name: {"shape": list(t.shape), "values": t.data.ravel().tolist()}
            for name, t in params.tensors.items()
        },
    }


def params_from_dict(doc, expected_spec=None):
    if not isinstance(doc, dict):
        raise MalformedCheckpointError("checkpoint root must be a JSON object")
    version = doc.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version!r}")
    try:
        spec = spec_from_dict(doc["spec"])
        stored_fp = doc["fingerprint"]
        entries = doc["params"]
    except (KeyError, TypeError) as exc:
        raise MalformedCheckpointError(f"checkpoint missing field: {exc}") from exc
    if stored_fp != fingerprint(spec):
        raise FingerprintError("stored fingerprint does not match stored spec")
    if expected_spec is not None and fingerprint(expected_spec) != stored_fp:
        raise FingerprintError(
            f"checkpoint fingerprint {stored_fp} != expected {fingerprint(expected_spec)}")

    reference = init_params(spec, 0)
    if list(entries) != reference.names():
        raise MalformedCheckpointError("parameter names do not match the network spec")
    tensors = {}
    for name, entry in entries.items():
        try:
            shape = tuple(int(s) for s in entry["shape"])
            values = np.asarray(entry["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedCheckpointError(f"bad entry for {name}: {exc}") from exc
        if shape != reference.tensors[name].shape or values.size != math.prod(shape):
            raise MalformedCheckpointError(f"shape mismatch for {name}")
        tensors[name] = Tensor(values.reshape(shape), requires_grad=True)
    return ModelParams(spec, tensors, version)


def save_checkpoint(params, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(params_to_dict(params), f)
    os.replace(tmp, path)


def load_checkpoint(path, expected_spec=None):
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise MalformedCheckpointError(f"{path}: not valid JSON ({exc})") from exc
    return params_from_dict(doc, expected_spec)
