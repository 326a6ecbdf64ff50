"""Command-line entry point: generate, derive, train, eval, verify.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ContractError, DataError, DimensionError, FormatError, TrainingDivergedError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("cdsnet")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _read_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return raw


def _split_config(raw: dict) -> tuple[dict, dict]:
    """Accept either {"model": {...}, "train": {...}} or flat field names."""
    from .models import ModelConfig
    from .training import TrainConfig

    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    model_cfg = dict(raw.get("model", {})) if isinstance(raw.get("model"), dict) else {}
    train_cfg = dict(raw.get("train", {})) if isinstance(raw.get("train"), dict) else {}
    for key, value in raw.items():
        if key in ("model", "train") and isinstance(value, dict):
            continue
        if key in train_keys:
            train_cfg[key] = value
        elif key in model_keys:
            model_cfg[key] = value
        else:
            raise ConfigError(f"unknown config field {key!r}")
    for key in model_cfg:
        if key not in model_keys:
            raise ConfigError(f"unknown model config field {key!r}")
    for key in train_cfg:
        if key not in train_keys:
            raise ConfigError(f"unknown train config field {key!r}")
    return model_cfg, train_cfg


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    from .data import generate_synthetic, save_dataset

    cfg = _read_config(args.config)
    params = {
        "num_classes": args.classes,
        "head_count": args.head_count,
        "imbalance_ratio": args.imbalance,
        "seed": args.seed,
        "noise_scale": args.noise_scale,
        "signature_jitter": args.signature_jitter,
        "test_head_count": args.test_head_count,
    }
    merged = {k: v for k, v in cfg.items()}
    merged.update({k: v for k, v in params.items() if v is not None})
    defaults = {"num_classes": 10, "head_count": 5000, "imbalance_ratio": 60.0, "seed": 42}
    for k, v in defaults.items():
        merged.setdefault(k, v)
    try:
        ds = generate_synthetic(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad generator option: {exc}") from exc
    out = Path(args.out)
    try:
        save_dataset(out, ds)
    except OSError as exc:
        raise DataError(f"cannot write dataset to {out}: {exc}") from exc
    counts = ds.manifest.class_counts
    print(json.dumps({"out": str(out), "class_counts": counts}, indent=2))
    return EXIT_OK


def cmd_derive(args) -> int:
    from .data import DeriveConfig, derive_chips, load_scenes, save_dataset

    try:
        scenes, annotations, options = load_scenes(args.annotations)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read derive job: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.annotations}: invalid JSON: {exc}") from exc
    options.update(_read_config(args.config))
    if args.seed is not None:
        options["seed"] = args.seed
    if args.class_cap is not None:
        options["class_cap"] = args.class_cap
    try:
        cfg = DeriveConfig(**options)
    except TypeError as exc:
        raise ConfigError(f"bad derive option: {exc}") from exc
    if not cfg.gsd_resampled:
        log.warning("scenes are not flagged as resampled to 30 cm GSD; chips may not match the reference protocol")
    ds = derive_chips(scenes, annotations, cfg)
    save_dataset(args.out, ds)
    print(json.dumps({"out": str(args.out), "class_counts": ds.manifest.class_counts, "skipped": ds.manifest.provenance["skipped"]}, indent=2))
    return EXIT_OK


def _train_configs(args):
    from .models import ModelConfig
    from .training import TrainConfig, default_augmentation

    model_cfg, train_cfg = _split_config(_read_config(args.config))
    flag_map = {
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
        "weight_decay": args.weight_decay,
        "total_batches": args.total_batches,
        "validate_every": args.validate_every,
        "augmentation": args.augmentation,
        "seed": args.seed,
        "precision": args.precision,
    }
    train_cfg.update({k: v for k, v in flag_map.items() if v is not None})
    if args.width_multiplier is not None:
        model_cfg["width_multiplier"] = args.width_multiplier
    if "seed" in train_cfg:
        model_cfg.setdefault("seed", train_cfg["seed"])
    try:
        mc = ModelConfig.from_spec(args.model, **model_cfg)
        train_cfg.setdefault("augmentation", default_augmentation(mc.architecture))
        tc = TrainConfig(**train_cfg)
    except (ContractError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return mc, tc


def cmd_train(args) -> int:
    from .data import load_dataset
    from .metrics import evaluate_logits
    from .models import build_model
    from .training import predict_logits, train

    mc, tc = _train_configs(args)
    ds = load_dataset(args.data)
    for split in ("train", "val"):
        if split not in ds.pixels or len(ds.labels[split]) == 0:
            raise DataError(f"{args.data}: split {split!r} is missing or empty")
    bands = ds.pixels["train"].shape[1]
    if bands != mc.input_channels:
        raise DataError(f"model expects {mc.input_channels} input bands, dataset has {bands}")
    if ds.manifest.num_classes != mc.num_classes:
        raise DataError(f"model has {mc.num_classes} classes, dataset has {ds.manifest.num_classes}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps({"model": mc.to_dict(), "train": tc.to_dict()}, indent=2), encoding="utf-8")
    model = build_model(mc)
    log.info("training %s for %d steps (augmentation=%s)", args.model, tc.total_batches, tc.augmentation)
    result = train(model, ds, tc, log_path=out / "train_log.jsonl", checkpoint_path=out / "best.ckpt")
    logits = predict_logits(model, ds.pixels["val"], tc.eval_batch_size)
    report = evaluate_logits(logits, ds.labels["val"], ds.manifest.class_names)
    (out / "val_report.json").write_text(report.to_json(), encoding="utf-8")
    print(json.dumps({"best_step": result.best_step, "best_val_i_acc": result.best_val_i_acc, "val_report": report.to_dict()}, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .data import load_dataset
    from .metrics import class_prior, evaluate_logits
    from .models import load_checkpoint
    from .training import predict_logits

    try:
        model = load_checkpoint(args.checkpoint)
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint not found: {args.checkpoint}") from exc
    ds = load_dataset(args.data)
    if args.split not in ds.pixels:
        raise DataError(f"{args.data}: no {args.split!r} split")
    bands = ds.pixels[args.split].shape[1]
    expected = model.config.input_channels
    if bands != expected:
        raise DataError(f"channel mismatch: checkpoint expects {expected} input bands, data has {bands}")
    prior = None
    if args.logit_adjust == "on":
        counts = ds.manifest.class_counts.get("train")
        if counts is None:
            raise DataError("logit adjustment needs train-split class counts in the manifest")
        prior = class_prior(counts)
    logits = predict_logits(model, ds.pixels[args.split])
    report = evaluate_logits(logits, ds.labels[args.split], ds.manifest.class_names, prior, args.tau)
    text = report.to_json()
    out = Path(args.out) if args.out else Path(args.checkpoint).with_name(f"eval_{args.split}_la-{args.logit_adjust}.json")
    out.write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def _parse_bias(text: Optional[str]) -> Optional[complex]:
    if text is None:
        return None
    try:
        return complex(text.replace(" ", ""))
    except ValueError as exc:
        raise ConfigError(f"--inject-bias expects a complex literal like 0.1+0.2j, got {text!r}") from exc


def cmd_verify(args) -> int:
    from .verify import format_report, run_suite

    bias = _parse_bias(args.inject_bias)
    results = run_suite(args.suite, seed=args.seed, test_bias=bias, trials=args.trials, instances=args.instances, e2e_trials=args.e2e_trials)
    print(format_report(results))
    failed = [r for r in results if not r.passed]
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in results], indent=2), encoding="utf-8")
    if failed:
        for r in failed:
            print(
                f"violated law {r.law}: error {r.worst_error:.3e} > {r.tolerance:.0e} at input seed ({args.seed}, {r.worst_seed})",
                file=sys.stderr,
            )
        return EXIT_VERIFY
    print(f"all {len(results)} laws hold")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdsnet", description="Co-domain symmetric networks for multispectral chips.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic imbalanced dataset")
    g.add_argument("--classes", type=int)
    g.add_argument("--head-count", type=int)
    g.add_argument("--imbalance", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--noise-scale", type=float)
    g.add_argument("--signature-jitter", type=float)
    g.add_argument("--test-head-count", type=int)
    g.add_argument("--config", help="JSON file of generator options")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("derive", help="cut chips from 8-band scenes and box annotations")
    d.add_argument("--annotations", required=True, help="JSON job file with scenes and annotations")
    d.add_argument("--config", help="JSON file of DeriveConfig fields")
    d.add_argument("--seed", type=int)
    d.add_argument("--class-cap", type=int)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_derive)

    t = sub.add_parser("train", help="train a model and keep the best validation checkpoint")
    t.add_argument("--model", required=True, help="cds-large | cds-small | baseline:<stem>")
    t.add_argument("--data", required=True)
    t.add_argument("--config", help="JSON file mirroring ModelConfig/TrainConfig fields")
    t.add_argument("--out", required=True)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--total-batches", type=int)
    t.add_argument("--validate-every", type=int)
    t.add_argument("--augmentation", choices=["none", "flips-crops"])
    t.add_argument("--seed", type=int)
    t.add_argument("--precision", choices=["f32", "f64"])
    t.add_argument("--width-multiplier", type=float)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", default="test")
    e.add_argument("--logit-adjust", choices=["on", "off"], default="off")
    e.add_argument("--tau", type=float, default=1.0)
    e.add_argument("--out", help="report path (default: next to the checkpoint)")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the symmetry, gradient and format suites")
    v.add_argument("--suite", choices=["equivariance", "gradients", "formats", "all"], default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--instances", type=int, default=20)
    v.add_argument("--e2e-trials", type=int, default=50, help="random scalars for the end-to-end invariance law")
    v.add_argument("--inject-bias", help="test hook: add this complex bias to every Econv in the equivariance suite")
    v.add_argument("--json", help="also write results as JSON")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"numerical failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ContractError, DimensionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
