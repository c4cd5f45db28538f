"""Transformer encoder-decoder semantic parser with tree-aware encoder options.

The encoder can combine three optional mechanisms, each switched by a flag on
:class:`ModelConfig`:

``pascal``
    head scores of the chosen layers are multiplied by the parent-proximity
    matrix before the softmax.
``sawrs``
    syntax-aware token vectors are concatenated with the word embeddings and
    projected back to ``d_model`` before positions are added.
``ca``
    every encoder layer builds a constituent prior from adjacent-token links
    and multiplies it into the post-softmax weights of all its heads.
"""

import hashlib
import math
import pickle
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from . import tensor as T
from .attention import attention_weights, constituent_prior, neighbor_link_probs
from .deptree import Sentence, padded_distance_batch
from .errors import ConfigError, DataError, InputError, VocabularyError
from .layers import Dropout, Embedding, LayerNorm, Linear, reset_all, sinusoidal_positions

PAD_TOKEN, UNK_TOKEN, SOS_TOKEN, EOS_TOKEN = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD_TOKEN, UNK_TOKEN, SOS_TOKEN, EOS_TOKEN)
PAD, UNK, SOS, EOS = range(4)

CHECKPOINT_FORMAT = "depsem-checkpoint"
CHECKPOINT_VERSION = 1


class Vocab:
    """Closed token inventory; ids 0-3 are the reserved specials."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, sequences) -> "Vocab":
        return cls(sorted({tok for seq in sequences for tok in seq}))

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def encode(self, tokens, allow_unknown=False) -> List[int]:
        ids = []
        for tok in tokens:
            idx = self.stoi.get(tok)
            if idx is None:
                if not allow_unknown:
                    raise VocabularyError(f"unknown token {tok!r}")
                idx = UNK
            ids.append(idx)
        return ids

    def decode(self, ids) -> List[str]:
        return [self.itos[i] for i in ids]

    def tokens(self) -> List[str]:
        return self.itos[len(SPECIALS):]


@dataclass
class ModelConfig:
    """Architecture and variant switches.

    Defaults follow the full-size baseline (512-wide, 8 heads, 2048 feed
    forward, 2 encoder and 3 decoder layers, dropout 0.1).
    """

    src_vocab_size: int = 0
    tgt_vocab_size: int = 0
    d_model: int = 512
    n_heads: int = 8
    d_ff: int = 2048
    n_enc_layers: int = 2
    n_dec_layers: int = 3
    dropout: float = 0.1
    pascal: bool = False
    sawrs: bool = False
    ca: bool = False
    pascal_layers: Tuple[int, ...] = (0,)
    pascal_heads: Optional[int] = None
    sigma: float = 1.0
    sawr_dim: int = 0
    link_dim: Optional[int] = None
    max_len: int = 64
    precision: str = "float32"

    def __post_init__(self):
        self.pascal_layers = tuple(int(i) for i in self.pascal_layers)

    def validate(self) -> "ModelConfig":
        for name in ("d_model", "n_heads", "d_ff", "n_enc_layers", "n_dec_layers", "max_len"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be a positive integer")
        if self.d_model % self.n_heads:
            raise ConfigError("d_model", f"{self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout", "must lie in [0, 1)")
        if self.sigma <= 0:
            raise ConfigError("sigma", "must be positive")
        if self.precision not in T.PRECISIONS:
            raise ConfigError("precision", f"must be one of {sorted(T.PRECISIONS)}")
        if self.pascal:
            bad = [i for i in self.pascal_layers if not 0 <= i < self.n_enc_layers]
            if bad or not self.pascal_layers:
                raise ConfigError("pascal_layers", f"layer indices must lie in [0, {self.n_enc_layers})")
            if self.pascal_heads is not None and not 1 <= self.pascal_heads <= self.n_heads:
                raise ConfigError("pascal_heads", f"must lie in [1, {self.n_heads}]")
        if self.sawrs and self.sawr_dim < 1:
            raise ConfigError("sawr_dim", "must be positive when sawrs is enabled")
        if self.link_dim is not None and self.link_dim < 1:
            raise ConfigError("link_dim", "must be positive")
        if self.src_vocab_size < len(SPECIALS) or self.tgt_vocab_size < len(SPECIALS):
            raise ConfigError("src_vocab_size" if self.src_vocab_size < len(SPECIALS) else "tgt_vocab_size",
                              "vocabulary must include the reserved symbols")
        return self

    @property
    def variant_name(self) -> str:
        parts = [name for name in ("pascal", "sawrs", "ca") if getattr(self, name)]
        return "+".join(parts) if parts else "baseline"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pascal_layers"] = list(self.pascal_layers)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown model setting")
        return cls(**data)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model, n_heads):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.wq = Linear(d_model, d_model)
        self.wk = Linear(d_model, d_model)
        self.wv = Linear(d_model, d_model)
        self.wo = Linear(d_model, d_model)

    def _split(self, x):
        b, n, _ = x.shape
        return x.reshape(b, n, self.n_heads, self.d_head).transpose(1, 2)

    def forward(self, query, memory, mask, dist=None, prior=None):
        q = self._split(self.wq(query))
        k = self._split(self.wk(memory))
        v = self._split(self.wv(memory))
        weights = attention_weights(q, k, mask, dist, prior)
        ctx = T.matmul(weights, v)
        b, _, n, _ = ctx.shape
        ctx = ctx.transpose(1, 2).reshape(b, n, self.n_heads * self.d_head)
        return self.wo(ctx), weights


class LinkScorer(nn.Module):
    """Bilinear adjacent-token scores feeding the constituent prior."""

    def __init__(self, d_model, link_dim):
        super().__init__()
        self.link_dim = link_dim
        self.query = Linear(d_model, link_dim)
        self.key = Linear(d_model, link_dim)

    def scores(self, hidden):
        q = self.query(hidden)
        k = self.key(hidden)
        right = (q[:, :-1] * k[:, 1:]).sum(-1) / self.link_dim
        left = (q[:, 1:] * k[:, :-1]).sum(-1) / self.link_dim
        return right, left

    def forward(self, hidden, prev=None, key_mask=None):
        right, left = self.scores(hidden)
        return neighbor_link_probs(right, left, prev, key_mask)


class FeedForward(nn.Module):
    def __init__(self, d_model, d_ff, dropout):
        super().__init__()
        self.fc1 = Linear(d_model, d_ff)
        self.fc2 = Linear(d_ff, d_model)
        self.drop = dropout

    def forward(self, x):
        return self.fc2(self.drop(T.relu(self.fc1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig, index: int, drop: Dropout):
        super().__init__()
        self.index = index
        self.uses_pascal = cfg.pascal and index in cfg.pascal_layers
        self.attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, drop)
        self.ln1 = LayerNorm(cfg.d_model)
        self.ln2 = LayerNorm(cfg.d_model)
        self.drop = drop
        self.links = LinkScorer(cfg.d_model, cfg.link_dim or cfg.d_model) if cfg.ca else None

    def forward(self, x, mask, key_mask, dist=None, prev_links=None):
        links = prior = None
        if self.links is not None:
            links = self.links(x, prev_links, key_mask)
            prior = constituent_prior(links).unsqueeze(1)
        a, weights = self.attn(x, x, mask, dist if self.uses_pascal else None, prior)
        x = self.ln1(x + self.drop(a))
        x = self.ln2(x + self.drop(self.ff(x)))
        return x, weights, links, prior


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig, drop: Dropout):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, drop)
        self.ln1 = LayerNorm(cfg.d_model)
        self.ln2 = LayerNorm(cfg.d_model)
        self.ln3 = LayerNorm(cfg.d_model)
        self.drop = drop

    def forward(self, y, memory, self_mask, cross_mask, history=None):
        # history: this layer's inputs at all positions so far (incremental decoding)
        a, _ = self.self_attn(y, y if history is None else history, self_mask)
        y = self.ln1(y + self.drop(a))
        a, _ = self.cross_attn(y, memory, cross_mask)
        y = self.ln2(y + self.drop(a))
        return self.ln3(y + self.drop(self.ff(y)))


@dataclass
class Batch:
    src_ids: torch.Tensor
    key_mask: torch.Tensor
    dist: Optional[torch.Tensor] = None
    sawr: Optional[torch.Tensor] = None
    tgt_in: Optional[torch.Tensor] = None
    tgt_out: Optional[torch.Tensor] = None


@dataclass
class Prediction:
    source: Sentence
    output_tokens: List[str]
    score: float

    @property
    def tokens(self) -> List[str]:
        """Output without the end-of-sequence marker."""
        if self.output_tokens and self.output_tokens[-1] == EOS_TOKEN:
            return self.output_tokens[:-1]
        return list(self.output_tokens)


class Seq2SeqParser(nn.Module):
    def __init__(self, cfg: ModelConfig, src_vocab: Vocab, tgt_vocab: Vocab, seed: int = 0):
        super().__init__()
        cfg.validate()
        if cfg.src_vocab_size != len(src_vocab) or cfg.tgt_vocab_size != len(tgt_vocab):
            raise ConfigError("src_vocab_size", "config vocabulary sizes disagree with the vocabularies")
        self.config = cfg
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.seed = seed
        self.dtype = T.dtype_for(cfg.precision)
        self.dropout_generator = torch.Generator().manual_seed(seed)
        self.sawr_provider = None

        drop = Dropout(cfg.dropout, self.dropout_generator)
        self.drop = drop
        self.src_embed = Embedding(cfg.src_vocab_size, cfg.d_model)
        self.tgt_embed = Embedding(cfg.tgt_vocab_size, cfg.d_model)
        self.sawr_proj = Linear(cfg.sawr_dim + cfg.d_model, cfg.d_model) if cfg.sawrs else None
        self.encoder = nn.ModuleList(EncoderLayer(cfg, i, drop) for i in range(cfg.n_enc_layers))
        self.decoder = nn.ModuleList(DecoderLayer(cfg, drop) for _ in range(cfg.n_dec_layers))
        self.out = Linear(cfg.d_model, cfg.tgt_vocab_size)
        self.register_buffer("positions", sinusoidal_positions(cfg.max_len + 1, cfg.d_model), persistent=False)

        reset_all(self, torch.Generator().manual_seed(seed))
        self.to(self.dtype)

    # -- encoder ---------------------------------------------------------
    def _embed(self, ids, table):
        return table(ids) * math.sqrt(self.config.d_model)

    def _pascal_dist(self, dist):
        cfg = self.config
        d = dist.to(self.dtype).unsqueeze(1)
        heads = cfg.pascal_heads or cfg.n_heads
        if heads == cfg.n_heads:
            return d
        ones = torch.ones_like(d).expand(-1, cfg.n_heads - heads, -1, -1)
        return torch.cat([d.expand(-1, heads, -1, -1), ones], dim=1)

    def encode_batch(self, src_ids, key_mask, dist=None, sawr=None, record=None):
        """Encoder states (B, n, d_model). ``record`` collects per-layer maps when given."""
        cfg = self.config
        n = src_ids.shape[1]
        if n > cfg.max_len:
            raise InputError(f"source length {n} exceeds max_len={cfg.max_len}")
        x = self._embed(src_ids, self.src_embed)
        if cfg.sawrs:
            if sawr is None:
                raise InputError("model uses syntax-aware representations but none were supplied")
            if sawr.shape[:2] != src_ids.shape or sawr.shape[2] != cfg.sawr_dim:
                raise InputError(f"SAWR batch {tuple(sawr.shape)} does not match sources {tuple(src_ids.shape)} "
                                 f"with sawr_dim={cfg.sawr_dim}")
            x = self.sawr_proj(T.concat_last_dim(sawr.to(self.dtype), x))
        x = self.drop(x + self.positions[:n])
        d = None
        if cfg.pascal:
            if dist is None:
                raise InputError("model uses parent-scaled attention but no dependency tree was supplied")
            d = self._pascal_dist(dist)
        mask = key_mask[:, None, None, :]
        links = None
        for layer in self.encoder:
            x, weights, links, prior = layer(x, mask, key_mask, d, links)
            if record is not None:
                record.append({"weights": weights.detach(), "links": None if links is None else links.detach(),
                               "prior": None if prior is None else prior.squeeze(1).detach()})
        return x

    # -- decoder ---------------------------------------------------------
    def decode_batch(self, memory, key_mask, tgt_in):
        m = tgt_in.shape[1]
        if m > self.config.max_len:
            raise InputError(f"target length {m} exceeds max_len={self.config.max_len}")
        y = self.drop(self._embed(tgt_in, self.tgt_embed) + self.positions[:m])
        causal = torch.tril(torch.ones(m, m, dtype=torch.bool))
        self_mask = causal[None, None] & (tgt_in != PAD)[:, None, None, :]
        cross_mask = key_mask[:, None, None, :]
        for layer in self.decoder:
            y = layer(y, memory, self_mask, cross_mask)
        return self.out(y)

    def decode_step(self, memory, key_mask, tokens, cache):
        """Logits for the newest position only; ``cache`` holds per-layer input histories."""
        t = cache["length"]
        if t >= self.config.max_len:
            raise InputError(f"target length {t + 1} exceeds max_len={self.config.max_len}")
        y = self.drop(self._embed(tokens[:, None], self.tgt_embed) + self.positions[t: t + 1])
        cache["ids"] = torch.cat([cache["ids"], tokens[:, None]], dim=1)
        self_mask = (cache["ids"] != PAD)[:, None, None, :]
        cross_mask = key_mask[:, None, None, :]
        for i, layer in enumerate(self.decoder):
            hist = y if cache["layers"][i] is None else torch.cat([cache["layers"][i], y], dim=1)
            cache["layers"][i] = hist
            y = layer(y, memory, self_mask, cross_mask, history=hist)
        cache["length"] = t + 1
        return self.out(y)[:, 0]

    def new_cache(self, batch_size):
        return {"length": 0, "ids": torch.zeros(batch_size, 0, dtype=torch.long),
                "layers": [None] * len(self.decoder)}

    def loss_batch(self, batch: Batch):
        memory = self.encode_batch(batch.src_ids, batch.key_mask, batch.dist, batch.sawr)
        logits = self.decode_batch(memory, batch.key_mask, batch.tgt_in)
        return T.cross_entropy(logits, batch.tgt_out, ignore_index=PAD)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


def build_model(cfg: ModelConfig, seed: int, src_vocab: Vocab, tgt_vocab: Vocab) -> Seq2SeqParser:
    """Fresh parser; identical ``(cfg, seed)`` give bitwise-identical parameters.

    Zero vocabulary sizes in ``cfg`` are filled in from the vocabularies.
    """
    if cfg.src_vocab_size == 0 or cfg.tgt_vocab_size == 0:
        cfg = ModelConfig(**{**cfg.to_dict(), "src_vocab_size": cfg.src_vocab_size or len(src_vocab),
                             "tgt_vocab_size": cfg.tgt_vocab_size or len(tgt_vocab)})
    return Seq2SeqParser(cfg, src_vocab, tgt_vocab, seed)


def parameter_checksum(model: nn.Module) -> str:
    h = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(tensor.detach().cpu().numpy()).tobytes())
    return h.hexdigest()


def _target_ids(vocab: Vocab, target) -> List[int]:
    toks = list(target)
    if not toks or toks[-1] != EOS_TOKEN:
        toks.append(EOS_TOKEN)
    return vocab.encode(toks)


def make_batch(model: Seq2SeqParser, sentences: Sequence[Sentence], sawr=None, with_targets=False) -> Batch:
    """Pad sentences into tensors.

    Trees are read only when the model uses parent-scaled attention, and
    ``sawr`` (one n x sawr_dim matrix per sentence) only when it uses SAWRs.
    """
    cfg = model.config
    if not sentences:
        raise InputError("empty batch")
    token_lists = [s.tokens for s in sentences]
    lengths = [len(t) for t in token_lists]
    if min(lengths) == 0:
        raise InputError("sentence with no tokens")
    width = max(lengths)
    src = torch.full((len(sentences), width), PAD, dtype=torch.long)
    for b, toks in enumerate(token_lists):
        src[b, : len(toks)] = torch.tensor(model.src_vocab.encode(toks, allow_unknown=True))
    key_mask = src != PAD
    batch = Batch(src, key_mask)

    if cfg.pascal:
        heads = []
        for i, s in enumerate(sentences):
            if s.heads is None:
                raise InputError(f"sentence {i} has no dependency tree but the model uses parent-scaled attention")
            heads.append(s.heads)
        batch.dist = torch.from_numpy(padded_distance_batch(heads, width, cfg.sigma)).to(model.dtype)
    if cfg.sawrs:
        if sawr is None:
            raise InputError("model uses syntax-aware representations but none were supplied")
        if len(sawr) != len(sentences):
            raise InputError(f"{len(sawr)} SAWR matrices for {len(sentences)} sentences")
        pad = torch.zeros(len(sentences), width, cfg.sawr_dim, dtype=model.dtype)
        for b, (mat, n) in enumerate(zip(sawr, lengths)):
            mat = torch.as_tensor(np.asarray(mat), dtype=model.dtype)
            if mat.shape != (n, cfg.sawr_dim):
                raise DataError(f"SAWR matrix shape {tuple(mat.shape)} != ({n}, {cfg.sawr_dim})", b)
            pad[b, :n] = mat
        batch.sawr = pad

    if with_targets:
        ids = []
        for i, s in enumerate(sentences):
            if s.target is None:
                raise InputError(f"sentence {i} has no target logic form")
            ids.append(_target_ids(model.tgt_vocab, s.target))
        m = max(len(t) for t in ids)
        tgt_in = torch.full((len(ids), m), PAD, dtype=torch.long)
        tgt_out = torch.full((len(ids), m), PAD, dtype=torch.long)
        for b, t in enumerate(ids):
            tgt_in[b, 0] = SOS
            tgt_in[b, 1: len(t)] = torch.tensor(t[:-1], dtype=torch.long)
            tgt_out[b, : len(t)] = torch.tensor(t, dtype=torch.long)
        batch.tgt_in, batch.tgt_out = tgt_in, tgt_out
    return batch


def encode(model: Seq2SeqParser, sentence: Sentence, sawr=None) -> torch.Tensor:
    """Encoder states (n, d_model) for one sentence."""
    batch = make_batch(model, [sentence], None if sawr is None else [sawr])
    return model.encode_batch(batch.src_ids, batch.key_mask, batch.dist, batch.sawr)[0]


def decode_train(model: Seq2SeqParser, enc: torch.Tensor, target) -> torch.Tensor:
    """Teacher-forced mean token cross-entropy of ``target`` given encoder states."""
    ids = _target_ids(model.tgt_vocab, target)
    tgt_in = torch.tensor([[SOS] + ids[:-1]], dtype=torch.long)
    tgt_out = torch.tensor([ids], dtype=torch.long)
    key_mask = torch.ones(1, enc.shape[0], dtype=torch.bool)
    logits = model.decode_batch(enc.unsqueeze(0), key_mask, tgt_in)
    return T.cross_entropy(logits, tgt_out, ignore_index=PAD)


@torch.no_grad()
def greedy_decode(model: Seq2SeqParser, batch: Batch, max_len: Optional[int] = None):
    """Argmax decoding for a batch; returns (token id lists incl. EOS if emitted, scores).

    At most ``max_len - 1`` tokens are generated so that any prediction, once
    EOS is appended, is still a valid training target.
    """
    max_len = max_len or model.config.max_len - 1
    memory = model.encode_batch(batch.src_ids, batch.key_mask, batch.dist, batch.sawr)
    b = memory.shape[0]
    ys = torch.full((b, 1), SOS, dtype=torch.long)
    done = torch.zeros(b, dtype=torch.bool)
    scores = torch.zeros(b, dtype=torch.float64)
    cache = model.new_cache(b)
    for _ in range(max_len):
        logits = model.decode_step(memory, batch.key_mask, ys[:, -1], cache)
        logp = T.log_softmax(logits)
        nxt = logp.argmax(dim=-1)
        step = logp.gather(-1, nxt[:, None]).squeeze(-1).to(torch.float64)
        scores = scores + torch.where(done, torch.zeros_like(step), step)
        nxt = torch.where(done, torch.full_like(nxt, PAD), nxt)
        ys = torch.cat([ys, nxt[:, None]], dim=1)
        done = done | (nxt == EOS)
        if bool(done.all()):
            break
    out = []
    for row in ys[:, 1:].tolist():
        ids = []
        for i in row:
            if i == PAD:
                break
            ids.append(i)
            if i == EOS:
                break
        out.append(ids)
    return out, scores.tolist()


def predict_batch(model: Seq2SeqParser, sentences: Sequence[Sentence], sawr=None,
                  batch_size: int = 64) -> List[Prediction]:
    was_training = model.training
    model.eval()
    preds = []
    try:
        for start in range(0, len(sentences), batch_size):
            chunk = sentences[start: start + batch_size]
            chunk_sawr = None if sawr is None else sawr[start: start + batch_size]
            batch = make_batch(model, chunk, chunk_sawr)
            ids, scores = greedy_decode(model, batch)
            for s, seq, sc in zip(chunk, ids, scores):
                preds.append(Prediction(s, model.tgt_vocab.decode(seq), sc))
    finally:
        model.train(was_training)
    return preds


def predict_greedy(model: Seq2SeqParser, sentence: Sentence, sawr=None) -> Prediction:
    return predict_batch(model, [sentence], None if sawr is None else [sawr])[0]


# -- checkpoints ---------------------------------------------------------

def model_state(model: Seq2SeqParser, **extra) -> dict:
    state = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "src_vocab": model.src_vocab.tokens(),
        "tgt_vocab": model.tgt_vocab.tokens(),
        "parameters": {k: v.detach().clone() for k, v in model.state_dict().items()},
        "extra": extra,
    }
    if model.sawr_provider is not None and hasattr(model.sawr_provider, "to_state"):
        state["sawr_provider"] = model.sawr_provider.to_state()
    return state


def model_from_state(state: dict) -> Seq2SeqParser:
    if state.get("format") != CHECKPOINT_FORMAT:
        raise DataError("not a parser checkpoint")
    if state.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {state.get('version')}")
    cfg = ModelConfig.from_dict(state["config"])
    model = Seq2SeqParser(cfg, Vocab(state["src_vocab"]), Vocab(state["tgt_vocab"]), state.get("seed", 0))
    expected = model.state_dict()
    params = state["parameters"]
    missing = sorted(set(expected) - set(params))
    if missing:
        raise DataError(f"checkpoint lacks parameter {missing[0]}")
    extra = sorted(set(params) - set(expected))
    if extra:
        raise DataError(f"checkpoint has unexpected parameter {extra[0]}")
    for name, tensor in params.items():
        if tuple(tensor.shape) != tuple(expected[name].shape):
            raise DataError(f"parameter {name} has shape {tuple(tensor.shape)}, "
                            f"expected {tuple(expected[name].shape)}")
    model.load_state_dict(params)
    if "sawr_provider" in state:
        from .sawr import SyntaxAwareEncoder

        model.sawr_provider = SyntaxAwareEncoder.from_state(state["sawr_provider"])
    return model


def save_checkpoint(model: Seq2SeqParser, path, **extra) -> None:
    torch.save(model_state(model, **extra), path)


def load_checkpoint(path) -> Seq2SeqParser:
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except (pickle.UnpicklingError, EOFError, RuntimeError) as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})")
    if not isinstance(state, dict):
        raise DataError(f"{path}: not a parser checkpoint")
    return model_from_state(state)


def clone_model(model: Seq2SeqParser) -> Seq2SeqParser:
    copy = model_from_state(model_state(model))
    copy.sawr_provider = model.sawr_provider
    return copy
