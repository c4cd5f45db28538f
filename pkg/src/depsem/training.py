"""Training loop, corpus evaluation and transductive ensemble fine-tuning."""

import json
import logging
import os
import random
import time
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence, Union

import torch

from .deptree import Sentence
from .errors import ConfigError, InputError, TrainingError
from .metrics import score_report
from .model import (Seq2SeqParser, clone_model, load_checkpoint, make_batch, model_from_state,
                    model_state, parameter_checksum, predict_batch, save_checkpoint)

log = logging.getLogger(__name__)

LABELING_MODES = ("union", "selected")


@dataclass
class TrainConfig:
    """Optimization settings; ``lr`` and ``batch_size`` default to the full-size values."""

    epochs: int = 45
    batch_size: int = 16
    lr: float = 1e-4
    weight_decay: float = 0.01
    seed: int = 0
    eval_every: int = 1
    precision: str = "float32"
    checkpoint_dir: Optional[str] = None
    patience: Optional[int] = None
    holdout_fraction: float = 0.0
    tel_epochs: int = 5
    tel_labeling: str = "union"
    tel_patience: Optional[int] = 1

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ConfigError("epochs", "must be at least 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size", "must be at least 1")
        if self.lr <= 0:
            raise ConfigError("lr", "must be positive")
        if self.eval_every < 1:
            raise ConfigError("eval_every", "must be at least 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction", "must lie in [0, 1)")
        if self.tel_labeling not in LABELING_MODES:
            raise ConfigError("tel_labeling", f"must be one of {LABELING_MODES}")
        if self.tel_epochs < 1:
            raise ConfigError("tel_epochs", "must be at least 1")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown training setting")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: Seq2SeqParser
    history: List[dict]
    best_epoch: int
    steps: int


def holdout_split(sentences: Sequence[Sentence], fraction: float, seed: int):
    """Split off a held-out fold to stand in for a missing dev set."""
    order = list(range(len(sentences)))
    random.Random(seed).shuffle(order)
    k = max(1, int(round(fraction * len(sentences))))
    held = sorted(order[:k])
    rest = sorted(order[k:])
    return [sentences[i] for i in rest], [sentences[i] for i in held]


def evaluate(model: Seq2SeqParser, dataset: Sequence[Sentence], sawr=None, ids=None) -> dict:
    """Greedy-decode ``dataset`` and score it against the gold targets."""
    if not dataset:
        raise InputError("cannot evaluate on an empty dataset")
    for i, s in enumerate(dataset):
        if s.target is None:
            raise InputError(f"sentence {i} has no gold target")
    preds = predict_batch(model, list(dataset), sawr)
    return score_report([p.tokens for p in preds], [list(s.target) for s in dataset], ids)


def _sawr_slice(sawr, idx):
    return None if sawr is None else [sawr[i] for i in idx]


def sawr_for_model(model: Seq2SeqParser, sentences, given=None):
    """SAWR matrices for ``model``: ``given`` if supplied, else from its own provider."""
    if not model.config.sawrs:
        return None
    if given is not None:
        return list(given)
    if model.sawr_provider is None:
        raise InputError("model uses SAWRs but has no provider and none were supplied")
    return model.sawr_provider.transform(list(sentences))


def _append_jsonl(path, row):
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")


def train(
    model: Seq2SeqParser,
    train_set: Sequence[Sentence],
    dev_set: Sequence[Sentence],
    cfg: TrainConfig,
    train_sawr=None,
    dev_sawr=None,
    run_dir: Optional[str] = None,
) -> TrainResult:
    """Train in place and return a copy of the best-on-dev checkpoint.

    Dev Exact Match is recorded every ``eval_every`` epochs (and after the
    last one); the earliest epoch with the highest score wins. With an empty
    dev set the last epoch wins. When ``run_dir`` is given, evaluated
    checkpoints go to ``epoch_{k}.ckpt`` with metrics in ``metrics.jsonl``
    and wall time in ``timing.jsonl``.
    """
    cfg.validate()
    train_set = list(train_set)
    dev_set = list(dev_set or [])
    if not train_set:
        raise InputError("training set is empty")
    if not dev_set and cfg.holdout_fraction > 0 and len(train_set) > 1:
        train_idx, dev_idx = holdout_split(list(range(len(train_set))), cfg.holdout_fraction, cfg.seed)
        dev_set = [train_set[i] for i in dev_idx]
        dev_sawr = _sawr_slice(train_sawr, dev_idx)
        train_set = [train_set[i] for i in train_idx]
        train_sawr = _sawr_slice(train_sawr, train_idx)

    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)
        for name in ("metrics.jsonl", "timing.jsonl"):
            open(os.path.join(run_dir, name), "w").close()

    model.dropout_generator.manual_seed(cfg.seed)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    rng = random.Random(cfg.seed)
    order = list(range(len(train_set)))
    history = []
    best_score, best_epoch, best_state = -1.0, 0, None
    evals_since_best = 0
    steps = 0

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        model.train()
        rng.shuffle(order)
        total, count = 0.0, 0
        for batch_no, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start: start + cfg.batch_size]
            batch = make_batch(model, [train_set[i] for i in idx], _sawr_slice(train_sawr, idx),
                               with_targets=True)
            loss = model.loss_batch(batch)
            if not torch.isfinite(loss):
                raise TrainingError(f"loss became {loss.item()} at epoch {epoch}, batch {batch_no}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            steps += 1
            total += loss.item() * len(idx)
            count += len(idx)
        elapsed = time.perf_counter() - started
        row = {"epoch": epoch, "train_loss": total / count, "steps": steps}

        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            if dev_set:
                report = evaluate(model, dev_set, dev_sawr)
                row["dev_exact"] = report["exact_match"]
                row["dev_tree"] = report["tree_match"]
                score = report["exact_match"]
            else:
                score = float(epoch)
            if score > best_score:
                best_score, best_epoch = score, epoch
                best_state = model_state(model)
                evals_since_best = 0
            else:
                evals_since_best += 1
            if run_dir is not None:
                save_checkpoint(model, os.path.join(run_dir, f"epoch_{epoch}.ckpt"), epoch=epoch)
            history.append(row)
            if run_dir is not None:
                _append_jsonl(os.path.join(run_dir, "metrics.jsonl"), row)
        if run_dir is not None:
            _append_jsonl(os.path.join(run_dir, "timing.jsonl"),
                          {"epoch": epoch, "variant": model.config.variant_name, "seconds": round(elapsed, 4)})
        log.info("epoch %d loss %.4f %s", epoch, row["train_loss"],
                 f"dev EM {row['dev_exact']:.1f}" if "dev_exact" in row else "")
        if cfg.patience is not None and evals_since_best >= cfg.patience:
            break

    best = model_from_state(best_state)
    best.sawr_provider = model.sawr_provider
    if run_dir is not None:
        save_checkpoint(best, os.path.join(run_dir, "best.ckpt"), epoch=best_epoch)
    return TrainResult(best, history, best_epoch, steps)


def select_best(scores: Sequence[float]) -> int:
    """Index of the highest score; ties go to the lowest index."""
    if not scores:
        raise InputError("no scores to select from")
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


@dataclass
class SyntheticCorpus:
    pairs: List[Sentence]
    provenance: List[dict]

    def __len__(self):
        return len(self.pairs)


def build_synthetic_corpus(models, dev_inputs, test_inputs, dev_sawr=None, test_sawr=None,
                           labeling="union", selected=0) -> SyntheticCorpus:
    """Label every dev and test input with model predictions.

    ``union`` keeps one pair per (model, input); ``selected`` keeps only the
    selected model's labels. Gold targets of the inputs are never read.
    """
    inputs = [s.without_target() for s in dev_inputs] + [s.without_target() for s in test_inputs]
    sides = ["dev"] * len(dev_inputs) + ["test"] * len(test_inputs)
    sawr = None
    if dev_sawr is not None and test_sawr is not None:
        sawr = list(dev_sawr) + list(test_sawr)
    chosen = range(len(models)) if labeling == "union" else [selected]
    pairs, provenance = [], []
    for m in chosen:
        model = models[m]
        preds = predict_batch(model, inputs, sawr_for_model(model, inputs, sawr))
        for i, (s, p) in enumerate(zip(inputs, preds)):
            pairs.append(Sentence(s.tokens, s.heads, p.tokens))
            provenance.append({"model": m, "side": sides[i], "index": i if sides[i] == "dev" else i - len(dev_inputs)})
    return SyntheticCorpus(pairs, provenance)


def tel(
    models: Sequence[Union[Seq2SeqParser, str]],
    dev_set: Sequence[Sentence],
    test_inputs: Sequence[Sentence],
    cfg: TrainConfig,
    dev_sawr=None,
    test_sawr=None,
    run_dir: Optional[str] = None,
):
    """Transductive ensemble fine-tuning.

    Every model labels every dev and test input, the best model on dev Exact
    Match is selected, and a copy of it is fine-tuned on the labelled inputs
    for ``cfg.tel_epochs`` with dev-based early stopping. Returns the tuned
    model and an audit dict.
    """
    cfg.validate()
    if not models:
        raise InputError("TEL needs at least one model")
    dev_set = list(dev_set)
    test_inputs = [s.without_target() for s in test_inputs]
    if not dev_set:
        raise InputError("TEL needs a labelled dev set for model selection")
    models = [load_checkpoint(m) if isinstance(m, (str, os.PathLike)) else m for m in models]

    dev_scores = [evaluate(m, dev_set, sawr_for_model(m, dev_set, dev_sawr))["exact_match"] for m in models]
    selected = select_best(dev_scores)
    corpus = build_synthetic_corpus(models, dev_set, test_inputs, dev_sawr, test_sawr,
                                    cfg.tel_labeling, selected)

    base = models[selected]
    student = clone_model(base)
    start_checksum = parameter_checksum(student)
    sawrs = base.config.sawrs
    corpus_sawr = None
    if sawrs and dev_sawr is not None and test_sawr is not None:
        joined = list(dev_sawr) + list(test_sawr)
        corpus_sawr = [joined[p["index"] + (0 if p["side"] == "dev" else len(dev_set))] for p in corpus.provenance]

    tune_cfg = TrainConfig(**{**cfg.to_dict(), "epochs": cfg.tel_epochs, "patience": cfg.tel_patience,
                              "eval_every": 1, "holdout_fraction": 0.0})
    corpus_sawr = sawr_for_model(base, corpus.pairs, corpus_sawr)
    base_dev_sawr = sawr_for_model(base, dev_set, dev_sawr)
    result = train(student, corpus.pairs, dev_set, tune_cfg, corpus_sawr, base_dev_sawr, run_dir=run_dir)
    after = evaluate(result.model, dev_set, base_dev_sawr)
    audit = {
        "n_models": len(models),
        "dev_exact_per_model": dev_scores,
        "selected_model": selected,
        "selected_checksum": parameter_checksum(base),
        "finetune_start_checksum": start_checksum,
        "labeling": cfg.tel_labeling,
        "corpus_size": len(corpus),
        "corpus_dev_pairs": sum(p["side"] == "dev" for p in corpus.provenance),
        "corpus_test_pairs": sum(p["side"] == "test" for p in corpus.provenance),
        "dev_exact_before": dev_scores[selected],
        "dev_exact_after": after["exact_match"],
        "dev_tree_after": after["tree_match"],
        "finetune_best_epoch": result.best_epoch,
        "finetune_history": result.history,
    }
    if run_dir is not None:
        with open(os.path.join(run_dir, "tel_audit.json"), "w", encoding="utf-8") as fh:
            json.dump(audit, fh, indent=2, sort_keys=True)
    return result.model, audit
