"""Dependency trees: CoNLL-U subset I/O and the parent-proximity matrix."""

import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FormatError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def validate_heads(heads: Sequence[int], line: Optional[int] = None) -> None:
    """Raise :class:`FormatError` unless ``heads`` encodes a single-rooted tree.

    The root is the one token whose head is itself.
    """
    n = len(heads)
    roots = []
    for i, h in enumerate(heads):
        if not 0 <= h < n:
            raise FormatError(f"token {i} has head {h} outside [0, {n})", line)
        if h == i:
            roots.append(i)
    if len(roots) != 1:
        raise FormatError(f"expected exactly one root, found {len(roots)}", line)
    # 0 = unvisited, 1 = on the current path, 2 = known to reach the root
    state = [0] * n
    state[roots[0]] = 2
    for start in range(n):
        path = []
        i = start
        while state[i] == 0:
            state[i] = 1
            path.append(i)
            i = heads[i]
        if state[i] == 1:
            raise FormatError(f"cycle through token {i}", line)
        for j in path:
            state[j] = 2


@dataclass(frozen=True)
class Sentence:
    """A tokenized utterance, optionally with its dependency heads and logic form.

    ``heads[i]`` is the 0-based index of token ``i``'s parent; the root points
    at itself. Dependency labels are not kept.
    """

    tokens: Tuple[str, ...]
    heads: Optional[Tuple[int, ...]] = None
    target: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.heads is not None:
            object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
            if len(self.heads) != len(self.tokens):
                raise FormatError(f"{len(self.heads)} heads for {len(self.tokens)} tokens")
            validate_heads(self.heads)
        if self.target is not None:
            object.__setattr__(self, "target", tuple(self.target))

    def __len__(self):
        return len(self.tokens)

    @property
    def root(self) -> int:
        return next(i for i, h in enumerate(self.heads) if h == i)

    def without_target(self) -> "Sentence":
        return Sentence(self.tokens, self.heads, None)


def is_projective(heads: Sequence[int]) -> bool:
    arcs = [(min(i, h), max(i, h)) for i, h in enumerate(heads) if h != i]
    for a, b in arcs:
        for c, d in arcs:
            if a < c < b < d:
                return False
    return True


def _lines(source) -> Iterable[str]:
    if isinstance(source, str):
        return source.splitlines()
    return (line.rstrip("\r\n") for line in source)


def parse_conll(source: Union[str, Iterable[str]]) -> List[Sentence]:
    """Read sentences from CoNLL-U text (a string, file object or line iterable).

    Only the ID, FORM and HEAD columns are used. Multiword ranges (``1-2``) and
    empty nodes (``1.1``) are skipped.
    """
    sentences = []
    tokens, heads = [], []
    start_line = None

    def flush():
        if not tokens:
            return
        converted = [i if h == 0 else h - 1 for i, h in enumerate(heads)]
        validate_heads(converted, start_line)
        sentences.append(Sentence(tokens[:], converted))
        tokens.clear()
        heads.clear()

    for lineno, raw in enumerate(_lines(source), start=1):
        line = raw.rstrip("\r").lstrip("﻿")
        if not line.strip():
            flush()
            start_line = None
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 7:
            cols = line.split()
        if len(cols) < 7:
            raise FormatError(f"expected at least 7 columns, got {len(cols)}", lineno)
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue
        if start_line is None:
            start_line = lineno
        try:
            idx = int(tok_id)
            head = int(cols[6])
        except ValueError:
            raise FormatError(f"non-integer ID or HEAD in {cols[0]!r}/{cols[6]!r}", lineno)
        if idx != len(tokens) + 1:
            raise FormatError(f"token ID {idx} out of sequence (expected {len(tokens) + 1})", lineno)
        if head < 0:
            raise FormatError(f"negative HEAD {head}", lineno)
        tokens.append(cols[1])
        heads.append(head)
    flush()
    return sentences


def serialize_conll(sentences: Sequence[Sentence]) -> str:
    out = io.StringIO()
    for s in sentences:
        if s.heads is None:
            raise FormatError("cannot serialize a sentence without heads")
        for i, (tok, h) in enumerate(zip(s.tokens, s.heads)):
            head = 0 if h == i else h + 1
            out.write(f"{i + 1}\t{tok}\t_\t_\t_\t_\t{head}\t_\t_\t_\n")
        out.write("\n")
    return out.getvalue()


def read_conll(path: Union[str, os.PathLike]) -> List[Sentence]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_conll(fh.read())


def write_conll(path: Union[str, os.PathLike], sentences: Sequence[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_conll(sentences))


def gaussian_pdf(offset, sigma: float = 1.0):
    return (_INV_SQRT_2PI / sigma) * np.exp(-np.square(offset) / (2.0 * sigma * sigma))


def distance_matrix(sentence: Union[Sentence, Sequence[int]], sigma: float = 1.0) -> np.ndarray:
    """Gaussian proximity of every position to each token's parent.

    Row ``t`` is the normal density with mean ``heads[t]`` and std ``sigma``
    evaluated at every column. Rows are not normalized.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    heads = sentence.heads if isinstance(sentence, Sentence) else tuple(sentence)
    if heads is None:
        raise FormatError("sentence has no dependency heads")
    positions = np.arange(len(heads), dtype=np.float64)
    offsets = positions[None, :] - np.asarray(heads, dtype=np.float64)[:, None]
    return gaussian_pdf(offsets, sigma)


def symmetrize(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"symmetrize expects a square matrix, got shape {d.shape}")
    return (d + d.T) / 2.0


def padded_distance_batch(head_lists: Sequence[Sequence[int]], width: int, sigma: float = 1.0) -> np.ndarray:
    """Stack distance matrices into (B, width, width); padding entries are 1."""
    out = np.ones((len(head_lists), width, width), dtype=np.float64)
    for b, heads in enumerate(head_lists):
        n = len(heads)
        out[b, :n, :n] = distance_matrix(heads, sigma)
    return out
