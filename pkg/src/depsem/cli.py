"""Command-line entry point: ``depsem <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data/config/IO error, 3 runtime or
numeric failure. Every command writes ``manifest.json`` into its ``--out``
directory; ``depsem replay`` re-runs a command from such a manifest.

Training config files are JSON::

    {
      "version": 1,
      "run_id": "baseline",
      "data": {"train": "data/train.tsv", "dev": "data/dev.tsv",
               "train_sawr": null, "dev_sawr": null},
      "model": {"d_model": 64, "n_heads": 4, "pascal": false, ...},
      "train": {"epochs": 30, "lr": 0.001, "seed": 0, ...},
      "sawr": {"epochs": 15, "emb_dim": 48, ...}
    }

Relative paths inside a config resolve against the config file's directory.
``model`` takes any :class:`~depsem.model.ModelConfig` field except the
vocabulary sizes, ``train`` any :class:`~depsem.training.TrainConfig` field
and ``sawr`` any :class:`~depsem.sawr.SyntaxAwareEncoder` parameter.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from typing import List, Optional

import torch

from . import __version__
from .datagen import export, generate, load_spec, read_dataset
from .errors import ConfigError, DepsemError, NumericError, TrainingError
from .heatmap import attention_maps, export_heatmaps
from .metrics import score_report
from .model import ModelConfig, Vocab, build_model, load_checkpoint, predict_batch, save_checkpoint
from .sawr import SyntaxAwareEncoder, load_sawr_file
from .training import TrainConfig, sawr_for_model, tel, train

log = logging.getLogger("depsem")

CONFIG_VERSION = 1
MANIFEST_NAME = "manifest.json"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
VARIANTS = ("pascal", "sawrs", "ca")
DEFAULT_THREADS = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- config handling -----------------------------------------------------

def _read_json(path, what="config"):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON in {what} file ({exc})")


def _resolve(base_dir, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base_dir, path))


def load_run_config(path) -> dict:
    """Read and check a training config; data paths come back absolute."""
    raw = _read_json(path)
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "config must be a JSON object")
    version = raw.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError("version", f"{path}: expected {CONFIG_VERSION}, got {version!r}")
    unknown = set(raw) - {"version", "run_id", "data", "model", "train", "sawr"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], f"{path}: unknown top-level key")
    base = os.path.dirname(os.path.abspath(path))
    data = dict(raw.get("data") or {})
    for key in ("train", "dev", "train_conll", "dev_conll", "train_sawr", "dev_sawr"):
        data[key] = _resolve(base, data.get(key))
    if data["train"] is None:
        raise ConfigError("data.train", f"{path}: a training file is required")
    model = dict(raw.get("model") or {})
    allowed = {f.name for f in fields(ModelConfig)} - {"src_vocab_size", "tgt_vocab_size"}
    bad = sorted(set(model) - allowed)
    if bad:
        raise ConfigError(f"model.{bad[0]}", f"{path}: unknown model setting")
    train_cfg = dict(raw.get("train") or {})
    bad = sorted(set(train_cfg) - {f.name for f in fields(TrainConfig)})
    if bad:
        raise ConfigError(f"train.{bad[0]}", f"{path}: unknown training setting")
    sawr = dict(raw.get("sawr") or {})
    bad = sorted(set(sawr) - set(SyntaxAwareEncoder().get_params()))
    if bad:
        raise ConfigError(f"sawr.{bad[0]}", f"{path}: unknown SAWR setting")
    return {"version": version, "run_id": raw.get("run_id") or "run", "data": data,
            "model": model, "train": train_cfg, "sawr": sawr}


def apply_overrides(cfg: dict, args) -> dict:
    for name in VARIANTS:
        value = getattr(args, name, None)
        if value is not None:
            cfg["model"][name] = value
    for name in ("seed", "epochs", "lr", "batch_size"):
        value = getattr(args, name, None)
        if value is not None:
            cfg["train"][name] = value
    if getattr(args, "run_id", None):
        cfg["run_id"] = args.run_id
    return cfg


def _model_config(cfg: dict) -> ModelConfig:
    model = dict(cfg["model"])
    if "pascal_layers" in model:
        model["pascal_layers"] = tuple(model["pascal_layers"])
    try:
        return ModelConfig(**model)
    except TypeError as exc:
        raise ConfigError("model", str(exc))


def _train_config(cfg: dict, out_dir: Optional[str]) -> TrainConfig:
    return TrainConfig.from_dict({**cfg["train"], "checkpoint_dir": out_dir}).validate()


# -- manifest ------------------------------------------------------------

def write_manifest(out_dir, command, argv, config_paths=(), dataset_paths=(), variants=None,
                   seed=None, extra=None) -> str:
    manifest = {
        "tool": "depsem",
        "tool_version": __version__,
        "command": command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config_paths": [os.path.abspath(p) for p in config_paths if p],
        "dataset_paths": [os.path.abspath(p) for p in dataset_paths if p],
        "variants": variants or {},
        "seed": seed,
        "output_dir": os.path.abspath(out_dir),
        "torch_version": torch.__version__,
        "threads": torch.get_num_threads(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out_dir, MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _variants(model_cfg) -> dict:
    return {name: bool(getattr(model_cfg, name)) for name in VARIANTS}


def _sawr_arg(model, sentences, path):
    if not model.config.sawrs:
        return None
    given = load_sawr_file(path).transform(sentences) if path else None
    return sawr_for_model(model, sentences, given)


# -- commands ------------------------------------------------------------

def cmd_gen_data(args, argv) -> int:
    spec = load_spec(args.spec)
    splits = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    paths = export(splits, args.out, test_sources=args.test_sources)
    with open(os.path.join(args.out, "grammar.json"), "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
    write_manifest(args.out, "gen-data", argv, config_paths=[args.spec], seed=spec.seed,
                   extra={"outputs": sorted(os.path.basename(p) for p in paths)})
    print(f"wrote {len(paths)} files to {args.out}")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    cfg = apply_overrides(load_run_config(args.config), args)
    model_cfg = _model_config(cfg)
    data = cfg["data"]
    train_set = read_dataset(data["train"], data["train_conll"], require_targets=True)
    dev_set = read_dataset(data["dev"], data["dev_conll"], require_targets=True) if data["dev"] else []
    run_dir = os.path.join(args.out, cfg["run_id"])
    train_cfg = _train_config(cfg, run_dir)

    provider = None
    train_sawr = dev_sawr = None
    if model_cfg.sawrs:
        if data["train_sawr"]:
            train_sawr = load_sawr_file(data["train_sawr"]).transform(train_set)
            if dev_set:
                if not data["dev_sawr"]:
                    raise ConfigError("data.dev_sawr", "required when data.train_sawr is given")
                dev_sawr = load_sawr_file(data["dev_sawr"]).transform(dev_set)
            dim = train_sawr[0].shape[1]
        else:
            params = {"seed": train_cfg.seed, **cfg["sawr"]}
            provider = SyntaxAwareEncoder(**params).fit(train_set)
            train_sawr = provider.transform(train_set)
            dev_sawr = provider.transform(dev_set) if dev_set else None
            dim = provider.dim
            log.info("SAWR provider held-out UAS %.4f", provider.heldout_uas_)
        if model_cfg.sawr_dim not in (0, dim):
            raise ConfigError("model.sawr_dim", f"is {model_cfg.sawr_dim} but SAWR vectors have {dim}")
        model_cfg.sawr_dim = dim

    src_vocab = Vocab.build(s.tokens for s in train_set)
    tgt_vocab = Vocab.build(s.target for s in train_set)
    model = build_model(model_cfg, train_cfg.seed, src_vocab, tgt_vocab)
    model.sawr_provider = provider
    result = train(model, train_set, dev_set, train_cfg, train_sawr, dev_sawr, run_dir=run_dir)

    summary = {
        "run_id": cfg["run_id"],
        "variant": model_cfg.variant_name,
        "best_epoch": result.best_epoch,
        "steps": result.steps,
        "parameters": model.num_parameters(),
        "best_checkpoint": os.path.join(run_dir, "best.ckpt"),
    }
    if result.history and "dev_exact" in result.history[-1]:
        best_row = next(r for r in result.history if r["epoch"] == result.best_epoch)
        summary["best_dev_exact"] = best_row["dev_exact"]
        summary["best_dev_tree"] = best_row["dev_tree"]
    if provider is not None:
        summary["sawr_heldout_uas"] = provider.heldout_uas_
    with open(os.path.join(run_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    write_manifest(args.out, "train", argv, config_paths=[args.config],
                   dataset_paths=[data["train"], data["dev"], data["train_sawr"], data["dev_sawr"]],
                   variants=_variants(model_cfg), seed=train_cfg.seed,
                   extra={"resolved_config": {**cfg, "model": model_cfg.to_dict(),
                                              "train": train_cfg.to_dict()}})
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data, args.conll, require_targets=True)
    preds = predict_batch(model, dataset, _sawr_arg(model, dataset, args.sawr))
    report = score_report([p.tokens for p in preds], [list(s.target) for s in dataset])
    report["checkpoint"] = os.path.abspath(args.checkpoint)
    report["data"] = os.path.abspath(args.data)
    report["variant"] = model.config.variant_name
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_manifest(args.out, "eval", argv, dataset_paths=[args.data, args.sawr],
                   variants=_variants(model.config), seed=model.seed,
                   extra={"checkpoint": os.path.abspath(args.checkpoint)})
    print(f"exact_match {report['exact_match']:.2f} tree_match {report['tree_match']:.2f}")
    return EXIT_OK


def cmd_predict(args, argv) -> int:
    model = load_checkpoint(args.checkpoint)
    inputs = [s.without_target() for s in read_dataset(args.input, args.conll)]
    preds = predict_batch(model, inputs, _sawr_arg(model, inputs, args.sawr))
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "predictions.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for s, p in zip(inputs, preds):
            fh.write(" ".join(s.tokens) + "\t" + " ".join(p.tokens) + "\n")
    write_manifest(args.out, "predict", argv, dataset_paths=[args.input, args.sawr],
                   variants=_variants(model.config), seed=model.seed,
                   extra={"checkpoint": os.path.abspath(args.checkpoint)})
    print(f"wrote {len(preds)} predictions to {os.path.join(args.out, 'predictions.tsv')}")
    return EXIT_OK


def cmd_tel(args, argv) -> int:
    models = [load_checkpoint(p) for p in args.checkpoints]
    dev = read_dataset(args.dev, require_targets=True)
    test_inputs = read_dataset(args.test_inputs, forbid_targets=True)
    settings = {}
    if args.config:
        raw = _read_json(args.config)
        if raw.get("version") != CONFIG_VERSION:
            raise ConfigError("version", f"{args.config}: expected {CONFIG_VERSION}, got {raw.get('version')!r}")
        settings = dict(raw.get("train") or {})
    for name in ("seed", "lr", "batch_size"):
        if getattr(args, name) is not None:
            settings[name] = getattr(args, name)
    if args.epochs is not None:
        settings["tel_epochs"] = args.epochs
    if args.labeling is not None:
        settings["tel_labeling"] = args.labeling
    cfg = TrainConfig.from_dict(settings).validate()
    dev_sawr = load_sawr_file(args.dev_sawr).transform(dev) if args.dev_sawr else None
    test_sawr = load_sawr_file(args.test_sawr).transform(test_inputs) if args.test_sawr else None
    os.makedirs(args.out, exist_ok=True)
    tuned, audit = tel(models, dev, test_inputs, cfg, dev_sawr, test_sawr, run_dir=args.out)
    save_checkpoint(tuned, os.path.join(args.out, "tel.ckpt"))
    write_manifest(args.out, "tel", argv, config_paths=[args.config],
                   dataset_paths=[args.dev, args.test_inputs, args.dev_sawr, args.test_sawr],
                   variants=_variants(tuned.config), seed=cfg.seed,
                   extra={"checkpoints": [os.path.abspath(p) for p in args.checkpoints]})
    print(f"selected model {audit['selected_model']} "
          f"dev EM {audit['dev_exact_before']:.2f} -> {audit['dev_exact_after']:.2f}")
    return EXIT_OK


def cmd_heatmap(args, argv) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data, args.conll)
    if not 0 <= args.index < len(dataset):
        raise ConfigError("--index", f"{args.index} is out of range for {len(dataset)} sentences in {args.data}")
    sentence = dataset[args.index]
    sawr = _sawr_arg(model, [sentence], args.sawr)
    maps = attention_maps(model, sentence, None if sawr is None else sawr[0])
    written = export_heatmaps(maps, sentence.tokens, args.out)
    write_manifest(args.out, "heatmap", argv, dataset_paths=[args.data, args.sawr],
                   variants=_variants(model.config), seed=model.seed,
                   extra={"checkpoint": os.path.abspath(args.checkpoint), "index": args.index,
                          "maps": sorted(maps)})
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    manifest = _read_json(args.manifest, "manifest")
    recorded = manifest.get("argv")
    if not isinstance(recorded, list) or not recorded or recorded[0] == "replay":
        raise ConfigError("argv", f"{args.manifest}: manifest has no replayable command")
    replay_argv = list(recorded)
    if args.out:
        out = os.path.abspath(args.out)
        if "--out" not in replay_argv:
            raise ConfigError("argv", f"{args.manifest}: recorded command has no --out")
        replay_argv[replay_argv.index("--out") + 1] = out
    cwd = os.getcwd()
    os.chdir(manifest.get("cwd") or cwd)
    try:
        return main(replay_argv)
    finally:
        os.chdir(cwd)


# -- parser --------------------------------------------------------------

def _variant_flags(p):
    for name in VARIANTS:
        p.add_argument(f"--{name}", dest=name, action="store_true", default=None,
                       help=f"enable {name} (overrides the config)")
        p.add_argument(f"--no-{name}", dest=name, action="store_false",
                       help=f"disable {name} (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depsem", description="Tree-aware Transformer semantic parsing.")
    parser.add_argument("--version", action="version", version=f"depsem {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic corpus")
    p.add_argument("--spec", required=True, help="grammar spec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--test-sources", action="store_true", help="also write a target-free test.src.tsv")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one variant combination")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-id")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    _variant_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a labelled dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--conll", help="tree file (default: alongside --data)")
    p.add_argument("--sawr", help="precomputed SAWR JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="decode an input file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--conll")
    p.add_argument("--sawr")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("tel", help="transductive ensemble fine-tuning")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--test-inputs", required=True, help="sources only; gold targets are rejected")
    p.add_argument("--config", help="JSON config; its 'train' block supplies settings")
    p.add_argument("--dev-sawr")
    p.add_argument("--test-sawr")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int, help="fine-tuning epochs")
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--labeling", choices=("union", "selected"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tel)

    p = sub.add_parser("heatmap", help="export attention, D and C matrices for one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--conll")
    p.add_argument("--sawr")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write to this directory instead of the recorded one")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    torch.set_num_threads(int(os.environ.get("DEPSEM_THREADS", DEFAULT_THREADS)))
    try:
        return args.func(args, argv)
    except (NumericError, TrainingError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (DepsemError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
