"""Alternating discriminator/generator training for the triplet-GAN.

Three modes share one loop:

``tripletgan``
    discriminator minimizes triplet loss + unsupervised GAN loss,
    generator minimizes feature matching.
``triplet_only``
    only the triplet loss on labeled rows; the generator is never touched.
``gan_only``
    unsupervised GAN with feature matching; labels are ignored.

All randomness (pool construction, batch order, noise) comes from one
``numpy.random.Generator`` held in :class:`TrainState`, so a state saved
between epochs resumes bit-identically.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ContractError, DivergenceError
from .networks import (
    EmbedderSpec,
    GeneratorSpec,
    embed,
    generate,
    init_params,
    params_from_dict,
    params_to_dict,
    save_checkpoint,
)
from .objectives import combined_disc_loss, feature_matching_loss
from .sampling import MiningConfig, mine_hard_triplets, sample_noise, sample_random_triplets
from .tensor import Tensor, backward

MODES = ("tripletgan", "triplet_only", "gan_only")
STATE_VERSION = 1
METRIC_KEYS = ("epoch", "l_ts", "l_tu", "l_td", "l_g", "d_real_mean", "d_fake_mean", "wall_ms")


@dataclass
class OptimizerConfig:
    name: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.name not in ("adam", "sgd"):
            raise ContractError(f"unknown optimizer {self.name!r}")
        if self.lr < 0:
            raise ContractError("lr must be >= 0")


@dataclass
class ModelConfig:
    embed_hidden: tuple = (512, 256)
    feature_dim: int = 16
    activation: str = "leaky_relu"
    noise_dim: int = 100
    gen_hidden: tuple = (256, 512)
    gen_activation: str = "relu"
    output_activation: str = "tanh"

    def embedder_spec(self, input_dim):
        return EmbedderSpec(input_dim, tuple(self.embed_hidden), self.feature_dim, self.activation)

    def generator_spec(self, output_dim):
        return GeneratorSpec(self.noise_dim, output_dim, tuple(self.gen_hidden),
                             self.output_activation, self.gen_activation)


@dataclass
class TrainConfig:
    mode: str = "tripletgan"
    epochs: int = 100
    batch_size: int = 64
    triplet_batch_size: int = 64
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    pretrain_epochs: int = 20
    mining: MiningConfig | None = None
    random_triplets_per_epoch: int | None = None
    seed: int = 0
    checkpoint_every: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.pretrain_epochs < 0:
            raise ContractError("pretrain_epochs must be >= 0")
        if self.batch_size < 1 or self.triplet_batch_size < 1:
            raise ContractError("batch sizes must be >= 1")
        if self.mode != "gan_only" and (self.mining is None) == (self.random_triplets_per_epoch is None):
            raise ContractError(
                "exactly one of mining / random_triplets_per_epoch must be set outside gan_only")


@dataclass
class TrainState:
    epoch: int
    embedder: object
    generator: object
    opt: dict
    rng: np.random.Generator
    history: list = field(default_factory=list)
    pretrain_history: list = field(default_factory=list)
    pretrained: bool = False


# ---------------------------------------------------------------------------
# optimizers


def new_moments(arrays):
    return {"m": {k: np.zeros_like(v) for k, v in arrays.items()},
            "v": {k: np.zeros_like(v) for k, v in arrays.items()},
            "t": 0}


def adam_step(params, grads, moments, hyper):
    """One bias-corrected Adam update. Returns ``(new_params, new_moments)``."""
    t = moments["t"] + 1
    b1, b2 = hyper.beta1, hyper.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * moments["m"][k] + (1.0 - b1) * g
        v = b2 * moments["v"][k] + (1.0 - b2) * (g * g)
        new_p[k] = p - hyper.lr * (m / c1) / (np.sqrt(v / c2) + hyper.eps)
        new_m[k], new_v[k] = m, v
    return new_p, {"m": new_m, "v": new_v, "t": t}


def sgd_step(params, grads, moments, hyper):
    return ({k: p - hyper.lr * grads[k] for k, p in params.items()},
            {**moments, "t": moments["t"] + 1})


def _apply_step(model, moments, hyper):
    step = adam_step if hyper.name == "adam" else sgd_step
    new_p, new_moments = step(model.arrays(), model.grads(), moments, hyper)
    for k, t in model.tensors.items():
        t.data = new_p[k]
        t.grad = None
    return new_moments


# ---------------------------------------------------------------------------
# state


def init_state(ds, cfg):
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    emb = init_params(cfg.model.embedder_spec(ds.dim), seeds[0])
    gen = init_params(cfg.model.generator_spec(ds.dim), seeds[1])
    opt = {"embedder": new_moments(emb.arrays()), "generator": new_moments(gen.arrays())}
    return TrainState(0, emb, gen, opt, np.random.default_rng(seeds[2]))


def _labeled_view(ds):
    idx = ds.labeled_indices
    if len(idx) == 0:
        raise ContractError("no labeled rows; triplet modes need labels")
    return idx, ds.labels[idx]


def build_triplet_pool(state, ds, cfg):
    """This epoch's triplets as dataset row indices (mined or random)."""
    idx, labels = _labeled_view(ds)
    if cfg.mining is not None:
        emb = embed(state.embedder.frozen(), ds.features[idx]).data
        pool = mine_hard_triplets(emb, labels, cfg.mining, state.rng)
    else:
        pool = sample_random_triplets(labels, cfg.random_triplets_per_epoch, state.rng)
    return pool.remap(idx)


def _check_finite(report, epoch):
    for term in ("l_ts", "l_tu", "l_g"):
        v = getattr(report, term)
        if v is not None and not math.isfinite(v):
            raise DivergenceError(term, epoch, v)


def _epoch_means(reports):
    out = {}
    for key in ("l_ts", "l_tu", "l_g", "d_real_mean", "d_fake_mean"):
        vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    parts = [out[k] for k in ("l_ts", "l_tu") if out[k] is not None]
    out["l_td"] = parts[0] if len(parts) == 1 else parts[0] + parts[1]
    return out


def _run_epoch(state, ds, cfg, mode, epoch_label):
    rng = state.rng
    X = ds.features
    bs, tb = cfg.batch_size, cfg.triplet_batch_size
    use_triplets = mode != "gan_only"
    use_gan = mode != "triplet_only"
    noise_dim = state.generator.spec.noise_dim

    if use_triplets:
        pool = build_triplet_pool(state, ds, cfg).triples
        order = rng.permutation(len(pool))
        n_steps = math.ceil(len(pool) / tb)
    else:
        n_steps = math.ceil(len(ds) / bs)
    if use_gan:
        reps = math.ceil(n_steps * bs / len(ds))
        real_order = np.concatenate([rng.permutation(len(ds)) for _ in range(reps)])

    reports = []
    for s in range(n_steps):
        parts, sizes = [], []
        if use_triplets:
            trip = pool[order[s * tb:(s + 1) * tb]]
            parts += [X[trip[:, 0]], X[trip[:, 1]], X[trip[:, 2]]]
            sizes += [len(trip)] * 3
        if use_gan:
            real = X[real_order[s * bs:(s + 1) * bs]]
            z = sample_noise(bs, noise_dim, rng)
            fake = generate(state.generator.frozen(), z).data
            parts += [real, fake]
            sizes += [bs, bs]

        feats = embed(state.embedder, Tensor(np.concatenate(parts)))
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        pieces = [feats[bounds[i]:bounds[i + 1]] for i in range(len(sizes))]
        triplet = tuple(pieces[:3]) if use_triplets else None
        real_f, fake_f = (pieces[-2], pieces[-1]) if use_gan else (None, None)
        loss, report = combined_disc_loss(triplet, real_f, fake_f)
        _check_finite(report, epoch_label)
        backward(loss)
        state.opt["embedder"] = _apply_step(state.embedder, state.opt["embedder"], cfg.optimizer)

        if use_gan:
            frozen_d = state.embedder.frozen()
            z = sample_noise(bs, noise_dim, rng)
            real_feats = embed(frozen_d, real).data
            fake_feats = embed(frozen_d, generate(state.generator, z))
            l_g = feature_matching_loss(real_feats, fake_feats)
            report.l_g = float(l_g.data)
            _check_finite(report, epoch_label)
            backward(l_g)
            state.opt["generator"] = _apply_step(state.generator, state.opt["generator"],
                                                 cfg.optimizer)
        reports.append(report)
    return _epoch_means(reports)


def train_epoch(state, ds, cfg):
    """One epoch in ``cfg.mode``; returns ``(state, metrics)``. Mutates ``state``."""
    t0 = time.perf_counter()
    metrics = _run_epoch(state, ds, cfg, cfg.mode, state.epoch + 1)
    state.epoch += 1
    metrics = {"epoch": state.epoch, **metrics,
               "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3)}
    metrics = {k: metrics[k] for k in METRIC_KEYS}
    state.history.append(metrics)
    return state, metrics


def pretrain(ds, cfg, state=None, progress=None):
    """Unsupervised GAN phase whose weights seed the main run.

    Skipped in triplet_only mode, which by definition never sees the GAN.
    Optimizer moments restart afterwards, as for a fresh fine-tuning run.
    """
    state = init_state(ds, cfg) if state is None else state
    if state.pretrained or cfg.mode == "triplet_only" or cfg.pretrain_epochs == 0:
        state.pretrained = True
        return state
    for e in range(cfg.pretrain_epochs):
        t0 = time.perf_counter()
        m = _run_epoch(state, ds, cfg, "gan_only", f"pretrain {e + 1}")
        m = {"epoch": e + 1, **m, "wall_ms": round((time.perf_counter() - t0) * 1000.0, 3)}
        state.pretrain_history.append({k: m[k] for k in METRIC_KEYS})
        if progress:
            progress(f"pretrain {e + 1}/{cfg.pretrain_epochs} l_tu={m['l_tu']:.4f} l_g={m['l_g']:.4f}")
    state.opt = {"embedder": new_moments(state.embedder.arrays()),
                 "generator": new_moments(state.generator.arrays())}
    state.pretrained = True
    return state


def fit(ds, cfg, out_dir=None, state=None, progress=None):
    """Pretrain (unless resuming) and run epochs up to ``cfg.epochs``.

    With ``out_dir`` set, each epoch appends a line to ``metrics.jsonl``
    and every ``checkpoint_every`` epochs a resumable state plus an
    embedder checkpoint are written.
    """
    if state is None:
        state = pretrain(ds, cfg, progress=progress)
        if out_dir and state.pretrain_history:
            with open(os.path.join(out_dir, "pretrain_metrics.jsonl"), "w") as f:
                for m in state.pretrain_history:
                    f.write(json.dumps(m) + "\n")
    while state.epoch < cfg.epochs:
        state, metrics = train_epoch(state, ds, cfg)
        if progress:
            shown = ", ".join(f"{k}={v:.4f}" for k, v in metrics.items()
                              if k not in ("epoch", "wall_ms") and v is not None)
            progress(f"epoch {state.epoch}/{cfg.epochs} {shown}")
        if out_dir:
            with open(os.path.join(out_dir, "metrics.jsonl"), "a") as f:
                f.write(json.dumps(metrics) + "\n")
            every = cfg.checkpoint_every
            if (every and state.epoch % every == 0) or state.epoch == cfg.epochs:
                write_checkpoints(state, out_dir)
    return state


def write_checkpoints(state, out_dir):
    ckpt = os.path.join(out_dir, "checkpoints")
    os.makedirs(ckpt, exist_ok=True)
    tag = f"epoch{state.epoch:04d}"
    save_state(state, os.path.join(ckpt, f"state_{tag}.json"))
    save_checkpoint(state.embedder, os.path.join(ckpt, f"embedder_{tag}.json"))
    save_checkpoint(state.generator, os.path.join(ckpt, f"generator_{tag}.json"))
    save_checkpoint(state.embedder, os.path.join(out_dir, "embedder.json"))


# ---------------------------------------------------------------------------
# state persistence


def _moments_to_dict(mom):
    return {"t": mom["t"],
            "m": {k: v.ravel().tolist() for k, v in mom["m"].items()},
            "v": {k: v.ravel().tolist() for k, v in mom["v"].items()}}


def _moments_from_dict(d, params):
    shapes = {k: t.shape for k, t in params.tensors.items()}
    return {"t": int(d["t"]),
            "m": {k: np.asarray(v, dtype=np.float64).reshape(shapes[k]) for k, v in d["m"].items()},
            "v": {k: np.asarray(v, dtype=np.float64).reshape(shapes[k]) for k, v in d["v"].items()}}


def state_to_dict(state):
    return {
        "version": STATE_VERSION,
        "epoch": state.epoch,
        "pretrained": state.pretrained,
        "embedder": params_to_dict(state.embedder),
        "generator": params_to_dict(state.generator),
        "opt": {k: _moments_to_dict(v) for k, v in state.opt.items()},
        "rng": state.rng.bit_generator.state,
        "history": state.history,
        "pretrain_history": state.pretrain_history,
    }


def state_from_dict(doc):
    if doc.get("version") != STATE_VERSION:
        raise ContractError(f"unsupported train-state version {doc.get('version')!r}")
    emb = params_from_dict(doc["embedder"])
    gen = params_from_dict(doc["generator"])
    rng = np.random.Generator(getattr(np.random, doc["rng"]["bit_generator"])())
    rng.bit_generator.state = doc["rng"]
    opt = {"embedder": _moments_from_dict(doc["opt"]["embedder"], emb),
           "generator": _moments_from_dict(doc["opt"]["generator"], gen)}
    return TrainState(doc["epoch"], emb, gen, opt, rng, list(doc["history"]),
                      list(doc["pretrain_history"]), doc["pretrained"])


def save_state(state, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(state_to_dict(state), f)
    os.replace(tmp, path)


def load_state(path):
    with open(path) as f:
        return state_from_dict(json.load(f))


def config_to_dict(cfg):
    d = asdict(cfg)
    d["model"]["embed_hidden"] = list(cfg.model.embed_hidden)
    d["model"]["gen_hidden"] = list(cfg.model.gen_hidden)
    return d


def config_from_dict(d):
    d = dict(d)
    if "optimizer" in d and isinstance(d["optimizer"], dict):
        d["optimizer"] = OptimizerConfig(**d["optimizer"])
    if d.get("mining") is not None and isinstance(d["mining"], dict):
        d["mining"] = MiningConfig(**d["mining"])
    if "model" in d and isinstance(d["model"], dict):
        m = dict(d["model"])
        for key in ("embed_hidden", "gen_hidden"):
            if key in m:
                m[key] = tuple(m[key])
        d["model"] = ModelConfig(**m)
    return TrainConfig(**d)


def with_changes(cfg, **changes):
    return replace(cfg, **changes)
