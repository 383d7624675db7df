"""Command line entry point: ``tripletgan {synth-data,train,embed,eval,sweep}``.

Exit codes: 0 success, 2 usage/config error, 3 I/O failure, 4 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import data as data_mod
from .errors import CheckpointError, ContractError, DimensionError, DivergenceError, IdxFormatError
from .evaluation import (
    DEFAULT_K,
    embed_dataset,
    evaluate,
    evaluate_sets,
    read_embeddings_csv,
    write_embeddings_csv,
)
from .networks import load_checkpoint
from .sampling import MiningConfig
from .trainer import ModelConfig, OptimizerConfig, TrainConfig, config_to_dict, fit, load_state

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class UsageExit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    train_data: object = None
    test_data: object = None
    out_dir: str | None = None
    labels_per_class: int | None = None
    labeled_total: int | None = None
    label_seed: int = 0
    eval_at_end: bool = True
    k: int = DEFAULT_K
    train: TrainConfig = field(default_factory=lambda: TrainConfig(mode="gan_only"))

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "train"}
        d.update(config_to_dict(self.train))
        return d


_RUN_KEYS = {f.name for f in dataclasses.fields(RunConfig)} - {"train"}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


def _strict(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ContractError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def run_config_from_dict(doc):
    unknown = set(doc) - _RUN_KEYS - _TRAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    train = {k: doc[k] for k in _TRAIN_KEYS if k in doc}
    if "model" in train:
        m = dict(train["model"]) if isinstance(train["model"], dict) else train["model"]
        if isinstance(m, dict):
            for key in ("embed_hidden", "gen_hidden"):
                if key in m:
                    m[key] = tuple(m[key])
        train["model"] = _strict(ModelConfig, m, "model")
    if "optimizer" in train:
        train["optimizer"] = _strict(OptimizerConfig, train["optimizer"], "optimizer")
    if train.get("mining") is not None:
        train["mining"] = _strict(MiningConfig, train["mining"], "mining")
    run = {k: doc[k] for k in _RUN_KEYS if k in doc}
    try:
        tc = TrainConfig(**train)
    except (TypeError, ContractError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return RunConfig(train=tc, **run)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_FLAG_MAP = {
    "mode": ("train", "mode"),
    "epochs": ("train", "epochs"),
    "batch_size": ("train", "batch_size"),
    "triplet_batch_size": ("train", "triplet_batch_size"),
    "pretrain_epochs": ("train", "pretrain_epochs"),
    "random_triplets": ("train", "random_triplets_per_epoch"),
    "seed": ("train", "seed"),
    "checkpoint_every": ("train", "checkpoint_every"),
    "lr": ("optimizer", "lr"),
    "optimizer": ("optimizer", "name"),
    "feature_dim": ("model", "feature_dim"),
    "hidden": ("model", "embed_hidden"),
    "noise_dim": ("model", "noise_dim"),
    "gen_hidden": ("model", "gen_hidden"),
    "train_data": ("run", "train_data"),
    "test_data": ("run", "test_data"),
    "out": ("run", "out_dir"),
    "labels_per_class": ("run", "labels_per_class"),
    "labeled_total": ("run", "labeled_total"),
    "label_seed": ("run", "label_seed"),
    "k": ("run", "k"),
}


def resolve_config(args):
    """defaults < config file < flags."""
    doc = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                doc = json.load(f)
        except OSError as exc:
            raise UsageExit(EXIT_USAGE, f"cannot read config {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise UsageExit(EXIT_USAGE, f"config {args.config} is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise UsageExit(EXIT_USAGE, "config root must be a JSON object")
    doc = json.loads(json.dumps(doc))
    for flag, (section, key) in _FLAG_MAP.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if key in ("embed_hidden", "gen_hidden"):
            value = _int_list(value)
        if section in ("train", "run"):
            doc[key] = value
        else:
            doc.setdefault(section, {})[key] = value
    if getattr(args, "mining_k", None) is not None or getattr(args, "mining_n", None) is not None:
        mining = doc.get("mining") or {}
        if args.mining_k is not None:
            mining["K"] = args.mining_k
        if args.mining_n is not None:
            mining["N"] = args.mining_n
        doc["mining"] = mining
        doc.pop("random_triplets_per_epoch", None)
    if getattr(args, "images", None) or getattr(args, "labels", None):
        doc["train_data"] = {"images": args.images, "labels": args.labels}
    if getattr(args, "test_images", None) or getattr(args, "test_labels", None):
        doc["test_data"] = {"images": args.test_images, "labels": args.test_labels}
    if getattr(args, "no_eval", False):
        doc["eval_at_end"] = False
    try:
        return run_config_from_dict(doc)
    except ConfigError as exc:
        raise UsageExit(EXIT_USAGE, f"config error: {exc}")


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageExit(EXIT_USAGE, f"expected comma-separated integers, got {text!r}")


def _data_paths(source):
    if source is None:
        return []
    if isinstance(source, str):
        return [source]
    if isinstance(source, dict) and set(source) == {"images", "labels"}:
        return [source["images"], source["labels"]]
    raise UsageExit(EXIT_USAGE, f"data source must be a CSV path or {{images, labels}}, got {source!r}")


def load_source(source, split):
    if isinstance(source, str):
        return data_mod.read_csv(source, split)
    return data_mod.load_idx(source["images"], source["labels"], split)


def _check_sources(cfg):
    if cfg.train_data is None:
        raise UsageExit(EXIT_USAGE, "no training data given (--train-data or train_data)")
    for p in _data_paths(cfg.train_data) + _data_paths(cfg.test_data):
        if not p or not os.path.isfile(p):
            raise UsageExit(EXIT_USAGE, f"dataset file not found: {p}")


def _prepare_train_set(cfg, ds):
    if cfg.labels_per_class is not None:
        return data_mod.select_labeled_subset(ds, cfg.labels_per_class, cfg.label_seed)
    if cfg.labeled_total is not None:
        return data_mod.select_labeled_subset(ds, seed=cfg.label_seed, total=cfg.labeled_total)
    return ds


def _progress(line):
    print(line, file=sys.stderr, flush=True)


def run_training(cfg, force=False, resume=None, progress=_progress):
    """Train per ``cfg`` into ``cfg.out_dir``; returns the EvalReport or None."""
    _check_sources(cfg)
    out = cfg.out_dir
    if out is None:
        raise UsageExit(EXIT_USAGE, "no output directory (--out or out_dir)")
    if resume is None and os.path.isdir(out) and os.listdir(out) and not force:
        raise UsageExit(EXIT_USAGE, f"run directory {out} is not empty (use --force)")
    try:
        train = load_source(cfg.train_data, "train")
        test = load_source(cfg.test_data, "test") if cfg.test_data is not None else None
    except (IdxFormatError, ContractError) as exc:
        raise UsageExit(EXIT_USAGE, f"bad dataset: {exc}")
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot read dataset: {exc}")
    try:
        train = _prepare_train_set(cfg, train)
    except ContractError as exc:
        raise UsageExit(EXIT_USAGE, f"config error: {exc}")
    if test is not None and test.dim != train.dim:
        raise UsageExit(EXIT_USAGE, f"test dim {test.dim} != train dim {train.dim}")

    try:
        if resume is None and os.path.isdir(out) and force:
            for name in ("metrics.jsonl", "pretrain_metrics.jsonl"):
                if os.path.exists(os.path.join(out, name)):
                    os.remove(os.path.join(out, name))
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "config.json"), "w") as f:
            json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
        state = load_state(resume) if resume else None
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot prepare run directory: {exc}")

    try:
        state = fit(train, cfg.train, out_dir=out, state=state, progress=progress)
    except DivergenceError as exc:
        raise UsageExit(EXIT_DIVERGED, f"training diverged: {exc}")
    except ContractError as exc:
        raise UsageExit(EXIT_USAGE, f"config error: {exc}")

    if not (cfg.eval_at_end and test is not None):
        return None
    try:
        report = evaluate(state.embedder, train, test, cfg.k, seed=cfg.train.seed,
                          config_fingerprint=state.embedder.fingerprint)
    except ContractError as exc:
        raise UsageExit(EXIT_USAGE, f"evaluation failed: {exc}")
    with open(os.path.join(out, "eval.json"), "w") as f:
        f.write(report.to_json() + "\n")
    return report


# ---------------------------------------------------------------------------
# commands


def cmd_synth_data(args):
    try:
        ds = data_mod.make_blobs(args.classes, args.per_class, args.dim, args.scale, args.sigma,
                                 args.seed)
    except ContractError as exc:
        raise UsageExit(EXIT_USAGE, str(exc))
    try:
        data_mod.write_csv(ds, args.out)
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot write {args.out}: {exc}")
    print(len(ds))
    return EXIT_OK


def cmd_train(args):
    cfg = resolve_config(args)
    report = run_training(cfg, force=args.force, resume=args.resume)
    if report is not None:
        print(report.to_json())
    return EXIT_OK


def cmd_embed(args):
    try:
        params = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise UsageExit(EXIT_USAGE, f"checkpoint error: {exc}")
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot read checkpoint: {exc}")
    if params.spec.kind != "embedder":
        raise UsageExit(EXIT_USAGE, "checkpoint does not hold an embedder")
    if args.expect_fingerprint and args.expect_fingerprint != params.fingerprint:
        raise UsageExit(EXIT_USAGE, f"fingerprint mismatch: checkpoint {params.fingerprint}, "
                                    f"expected {args.expect_fingerprint}")
    source = args.data if args.data else {"images": args.images, "labels": args.labels}
    try:
        ds = load_source(source, "train")
    except (IdxFormatError, ContractError) as exc:
        raise UsageExit(EXIT_USAGE, f"bad dataset: {exc}")
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot read dataset: {exc}")
    try:
        es = embed_dataset(params, ds)
    except DimensionError as exc:
        raise UsageExit(EXIT_USAGE, str(exc))
    try:
        write_embeddings_csv(es, args.out)
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot write {args.out}: {exc}")
    print(len(es))
    return EXIT_OK


def cmd_eval(args):
    try:
        gallery = read_embeddings_csv(args.gallery, "gallery")
        queries = read_embeddings_csv(args.queries, "test")
    except ContractError as exc:
        raise UsageExit(EXIT_USAGE, f"malformed CSV: {exc}")
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot read CSV: {exc}")
    try:
        report = evaluate_sets(gallery, queries, args.k, args.metrics)
    except (ContractError, DimensionError) as exc:
        raise UsageExit(EXIT_USAGE, str(exc))
    print(report.to_json())
    return EXIT_OK


def _sweep_one(job):
    base_doc, vary, value, out_dir = job
    doc = json.loads(json.dumps(base_doc))
    if vary == "feature_dim":
        doc.setdefault("model", {})["feature_dim"] = value
    else:
        doc["labels_per_class"] = value
        doc.pop("labeled_total", None)
    doc["out_dir"] = out_dir
    doc["eval_at_end"] = True
    try:
        cfg = run_config_from_dict(doc)
        report = run_training(cfg, force=True, progress=None)
        if report is None:
            return {"value": value, "accuracy": "", "map": "", "error": "no test data"}
        return {"value": value, "accuracy": report.accuracy, "map": report.map, "error": ""}
    except (UsageExit, ConfigError) as exc:
        return {"value": value, "accuracy": "", "map": "", "error": str(exc)}


def cmd_sweep(args):
    cfg = resolve_config(args)
    values = _int_list(args.values)
    if not values or any(v < 1 for v in values):
        raise UsageExit(EXIT_USAGE, "--values must be positive integers")
    base = cfg.to_dict()
    root = cfg.out_dir or "sweep"
    jobs = [(base, args.vary, v, os.path.join(root, f"{args.vary}={v}")) for v in values]
    if args.parallel and args.parallel > 1:
        with ProcessPoolExecutor(args.parallel) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = []
        for job in jobs:
            _progress(f"sweep {args.vary}={job[2]}")
            rows.append(_sweep_one(job))
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["value", "accuracy", "map", "error"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    try:
        os.makedirs(root, exist_ok=True)
        with open(os.path.join(root, "sweep.csv"), "w") as f:
            f.write(buf.getvalue())
    except OSError as exc:
        raise UsageExit(EXIT_IO, f"cannot write sweep table: {exc}")
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--train-data", help="training CSV (label,f0,...)")
    p.add_argument("--test-data", help="test CSV")
    p.add_argument("--images", help="training IDX images")
    p.add_argument("--labels", help="training IDX labels")
    p.add_argument("--test-images")
    p.add_argument("--test-labels")
    p.add_argument("--out", help="run directory")
    p.add_argument("--mode", choices=("tripletgan", "triplet_only", "gan_only"))
    p.add_argument("--epochs", type=int)
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--triplet-batch-size", type=int)
    p.add_argument("--random-triplets", type=int, help="random triplets per epoch")
    p.add_argument("--mining-k", type=int, help="hard mining: queries per epoch")
    p.add_argument("--mining-n", type=int, help="hard mining: triplets per query")
    p.add_argument("--optimizer", choices=("adam", "sgd"))
    p.add_argument("--lr", type=float)
    p.add_argument("--feature-dim", type=int)
    p.add_argument("--hidden", help="embedder hidden widths, e.g. 512,256")
    p.add_argument("--noise-dim", type=int)
    p.add_argument("--gen-hidden", help="generator hidden widths")
    p.add_argument("--labels-per-class", type=int)
    p.add_argument("--labeled-total", type=int)
    p.add_argument("--label-seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--no-eval", action="store_true", help="skip evaluation at the end")


def build_parser():
    parser = argparse.ArgumentParser(prog="tripletgan")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="write a synthetic Gaussian-blob CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--scale", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="pretrain + train, optionally evaluate")
    _add_train_flags(p)
    p.add_argument("--force", action="store_true", help="reuse a nonempty run directory")
    p.add_argument("--resume", help="train-state file to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="export embeddings of a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--out", required=True)
    p.add_argument("--expect-fingerprint", help="refuse checkpoints with another spec fingerprint")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="k-NN accuracy and mAP from embedding CSVs")
    p.add_argument("--gallery", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--metrics", choices=("knn", "map", "both"), default="both")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="one run per feature count or label budget")
    _add_train_flags(p)
    p.add_argument("--vary", required=True, choices=("feature_dim", "labels_per_class"))
    p.add_argument("--values", required=True, help="comma-separated positive integers")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "embed" and not args.data and not (args.images and args.labels):
        parser.error("embed needs --data or --images/--labels")
    try:
        return args.func(args)
    except UsageExit as exc:
        print(f"tripletgan: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
