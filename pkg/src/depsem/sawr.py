"""Syntax-aware word representations.

:class:`SyntaxAwareEncoder` is a small graph-based dependency parser: a
one-layer BiLSTM over word embeddings followed by a biaffine scorer that picks
each token's head (a token choosing itself is the root). Once fitted, its
BiLSTM states are the syntax-aware vectors handed to the semantic parser.

:class:`FileSawrProvider` serves vectors computed elsewhere, stored as JSON.
"""

import json
import math
import os
import random
from typing import List, Optional, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from . import tensor as T
from .deptree import Sentence
from .errors import DataError, InputError
from .layers import Embedding, Linear, reset_all
from .validation import check_sentences

_PAD, _UNK = 0, 1


class _HeadScorer(nn.Module):
    def __init__(self, vocab_size, emb_dim, hidden, arc_dim):
        super().__init__()
        self.embed = Embedding(vocab_size, emb_dim)
        self.lstm = nn.LSTM(emb_dim, hidden, batch_first=True, bidirectional=True)
        self.dep_mlp = Linear(2 * hidden, arc_dim)
        self.head_mlp = Linear(2 * hidden, arc_dim)
        self.biaffine = nn.Parameter(torch.zeros(arc_dim, arc_dim))
        self.head_bias = nn.Parameter(torch.zeros(arc_dim))

    def reset(self, generator):
        reset_all(self, generator)
        bound = 1.0 / math.sqrt(self.lstm.hidden_size)
        with torch.no_grad():
            for p in self.lstm.parameters():
                p.uniform_(-bound, bound, generator=generator)
            self.biaffine.zero_()
            self.head_bias.zero_()

    def hidden(self, ids, lengths):
        x = self.embed(ids)
        packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
        out, _ = self.lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=ids.shape[1])
        return out

    def forward(self, ids, lengths):
        h = self.hidden(ids, lengths)
        dep = torch.relu(self.dep_mlp(h))
        head = torch.relu(self.head_mlp(h))
        # scores[b, i, j]: token i takes token j as its head
        scores = dep @ self.biaffine @ head.transpose(1, 2) + (head @ self.head_bias)[:, None, :]
        return h, scores


class SyntaxAwareEncoder(BaseEstimator, TransformerMixin):
    """Dependency parser whose BiLSTM states serve as SAWRs.

    Parameters
    ----------
    dim : int
        Output width; must be even (two LSTM directions of ``dim // 2``).
    holdout : float
        Fraction of the fitting data kept aside to measure unlabeled
        attachment accuracy (``heldout_uas_``).
    """

    def __init__(self, dim=64, emb_dim=48, arc_dim=64, epochs=15, batch_size=32, lr=2e-3,
                 holdout=0.1, seed=0):
        self.dim = dim
        self.emb_dim = emb_dim
        self.arc_dim = arc_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.holdout = holdout
        self.seed = seed

    def _ids(self, sentences):
        lengths = [len(s) for s in sentences]
        ids = torch.zeros(len(sentences), max(lengths), dtype=torch.long)
        for b, s in enumerate(sentences):
            ids[b, : len(s)] = torch.tensor([self.vocab_.get(t, _UNK) for t in s.tokens])
        return ids, torch.tensor(lengths)

    def fit(self, X, y=None):
        sentences = check_sentences(X, require_heads=True)
        if self.dim % 2 or self.dim < 2:
            raise InputError(f"dim must be a positive even number, got {self.dim}")
        rng = random.Random(self.seed)
        order = list(range(len(sentences)))
        rng.shuffle(order)
        n_hold = int(round(self.holdout * len(sentences))) if len(sentences) > 1 else 0
        held = [sentences[i] for i in order[:n_hold]]
        train = [sentences[i] for i in order[n_hold:]]

        vocab = sorted({t for s in train for t in s.tokens})
        self.vocab_ = {t: i + 2 for i, t in enumerate(vocab)}
        gen = torch.Generator().manual_seed(self.seed)
        self.model_ = _HeadScorer(len(self.vocab_) + 2, self.emb_dim, self.dim // 2, self.arc_dim)
        self.model_.reset(gen)
        opt = torch.optim.AdamW(self.model_.parameters(), lr=self.lr)
        self.loss_history_ = []
        for _ in range(self.epochs):
            rng.shuffle(train)
            total = 0.0
            for start in range(0, len(train), self.batch_size):
                chunk = train[start: start + self.batch_size]
                loss = self._loss(chunk)
                opt.zero_grad()
                loss.backward()
                opt.step()
                total += loss.item() * len(chunk)
            self.loss_history_.append(total / len(train))
        self.model_.eval()
        self.heldout_uas_ = self.attachment_score(held) if held else None
        return self

    def _loss(self, chunk):
        ids, lengths = self._ids(chunk)
        _, scores = self.model_(ids, lengths)
        n = ids.shape[1]
        valid = torch.arange(n)[None, :] < lengths[:, None]
        scores = scores.masked_fill(~valid[:, None, :], -1e9)
        gold = torch.zeros_like(ids)
        for b, s in enumerate(chunk):
            gold[b, : len(s)] = torch.tensor(s.heads)
        gold = torch.where(valid, gold, torch.full_like(gold, -1))
        return T.cross_entropy(scores, gold, ignore_index=-1)

    @torch.no_grad()
    def predict_heads(self, X) -> List[List[int]]:
        check_is_fitted(self, "model_")
        sentences = check_sentences(X)
        out = []
        for start in range(0, len(sentences), 128):
            chunk = sentences[start: start + 128]
            ids, lengths = self._ids(chunk)
            _, scores = self.model_(ids, lengths)
            for b, n in enumerate(lengths.tolist()):
                out.append(scores[b, :n, :n].argmax(-1).tolist())
        return out

    def attachment_score(self, X) -> float:
        """Fraction of tokens whose predicted head matches the gold head."""
        sentences = check_sentences(X, require_heads=True)
        pred = self.predict_heads(sentences)
        correct = sum(p == g for ps, s in zip(pred, sentences) for p, g in zip(ps, s.heads))
        return correct / sum(len(s) for s in sentences)

    @torch.no_grad()
    def transform(self, X) -> List[np.ndarray]:
        check_is_fitted(self, "model_")
        sentences = check_sentences(X)
        out = []
        for start in range(0, len(sentences), 128):
            chunk = sentences[start: start + 128]
            ids, lengths = self._ids(chunk)
            h = self.model_.hidden(ids, lengths)
            for b, n in enumerate(lengths.tolist()):
                out.append(h[b, :n].to(torch.float64).numpy().copy())
        return out

    def to_state(self) -> dict:
        check_is_fitted(self, "model_")
        return {
            "params": self.get_params(),
            "vocab": self.vocab_,
            "weights": {k: v.clone() for k, v in self.model_.state_dict().items()},
            "heldout_uas": self.heldout_uas_,
        }

    @classmethod
    def from_state(cls, state) -> "SyntaxAwareEncoder":
        enc = cls(**state["params"])
        enc.vocab_ = dict(state["vocab"])
        enc.model_ = _HeadScorer(len(enc.vocab_) + 2, enc.emb_dim, enc.dim // 2, enc.arc_dim)
        enc.model_.load_state_dict(state["weights"])
        enc.model_.eval()
        enc.heldout_uas_ = state.get("heldout_uas")
        enc.loss_history_ = []
        return enc


def train_sawr_provider(dataset: Sequence[Sentence], dim: int = 64, seed: int = 0, **kwargs) -> SyntaxAwareEncoder:
    if not dataset:
        raise InputError("cannot train a SAWR provider on an empty dataset")
    return SyntaxAwareEncoder(dim=dim, seed=seed, **kwargs).fit(dataset)


class FileSawrProvider:
    """Vectors loaded from a SAWR file, aligned with dataset order."""

    def __init__(self, dim: int, matrices: Sequence[np.ndarray]):
        self.dim = dim
        self.matrices = [np.asarray(m, dtype=np.float64).reshape(len(m), dim) for m in matrices]

    def vectors(self, index: int, sentence: Optional[Sentence] = None) -> np.ndarray:
        if not 0 <= index < len(self.matrices):
            raise DataError(f"no stored vectors (file holds {len(self.matrices)} sentences)", index)
        mat = self.matrices[index]
        if sentence is not None and mat.shape[0] != len(sentence):
            raise DataError(f"{mat.shape[0]} stored rows for {len(sentence)} tokens", index)
        return mat

    def transform(self, X) -> List[np.ndarray]:
        sentences = check_sentences(X)
        return [self.vectors(i, s) for i, s in enumerate(sentences)]


def save_sawr_file(path, matrices: Sequence[np.ndarray], dim: Optional[int] = None) -> None:
    matrices = [np.asarray(m, dtype=np.float64) for m in matrices]
    if dim is None:
        dim = int(matrices[0].shape[1]) if matrices else 0
    payload = {"dim": dim, "sentences": [m.tolist() for m in matrices]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_sawr_file(path) -> FileSawrProvider:
    if not os.path.exists(path):
        raise FileNotFoundError(f"SAWR file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})")
    if not isinstance(payload, dict) or "dim" not in payload or "sentences" not in payload:
        raise DataError(f"{path}: expected an object with 'dim' and 'sentences'")
    dim = int(payload["dim"])
    mats = []
    for i, rows in enumerate(payload["sentences"]):
        for row in rows:
            if len(row) != dim:
                raise DataError(f"row of width {len(row)} in a file declaring dim={dim}", i)
        mats.append(np.asarray(rows, dtype=np.float64).reshape(len(rows), dim))
    return FileSawrProvider(dim, mats)
