"""Attention, distance-matrix and constituent-prior heat maps (JSON and PGM)."""

import json
import os
from typing import Dict, Optional, Sequence

import numpy as np
import torch

from .deptree import Sentence, distance_matrix, symmetrize
from .model import Seq2SeqParser, make_batch


@torch.no_grad()
def attention_maps(model: Seq2SeqParser, sentence: Sentence, sawr=None) -> Dict[str, np.ndarray]:
    """Named matrices for one sentence.

    Keys: ``layer{l}_head{h}`` and ``layer{l}_mean`` for encoder
    self-attention, ``C_layer{l}`` for constituent priors (CA models only),
    and ``D`` / ``D_sym`` when the sentence has a tree.
    """
    was_training = model.training
    model.eval()
    try:
        batch = make_batch(model, [sentence], None if sawr is None else [sawr])
        record = []
        model.encode_batch(batch.src_ids, batch.key_mask, batch.dist, batch.sawr, record=record)
    finally:
        model.train(was_training)
    maps = {}
    for l, entry in enumerate(record):
        w = entry["weights"][0].to(torch.float64).numpy()
        for h in range(w.shape[0]):
            maps[f"layer{l}_head{h}"] = w[h]
        maps[f"layer{l}_mean"] = w.mean(axis=0)
        if entry["prior"] is not None:
            maps[f"C_layer{l}"] = entry["prior"][0].to(torch.float64).numpy()
    if sentence.heads is not None:
        d = distance_matrix(sentence, model.config.sigma)
        maps["D"] = d
        maps["D_sym"] = symmetrize(d)
    return maps


def row_normalize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return m / m.sum(axis=1, keepdims=True)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / denom) if denom > 0 else 0.0


def write_matrix_json(path, name: str, matrix: np.ndarray, tokens: Sequence[str]) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    payload = {
        "name": name,
        "rows": list(tokens),
        "cols": list(tokens),
        "shape": list(matrix.shape),
        "values": matrix.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def write_pgm(path, matrix: np.ndarray, cell: int = 8) -> None:
    """Binary grayscale PGM; each entry becomes a ``cell`` x ``cell`` block, white = max."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    scaled = np.zeros_like(m) if hi == lo else (m - lo) / (hi - lo)
    pixels = np.round(scaled * 255).astype(np.uint8)
    pixels = np.kron(pixels, np.ones((cell, cell), dtype=np.uint8))
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


def export_heatmaps(maps: Dict[str, np.ndarray], tokens: Sequence[str], out_dir,
                    names: Optional[Sequence[str]] = None) -> list:
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in names or sorted(maps):
        base = os.path.join(out_dir, name)
        write_matrix_json(base + ".json", name, maps[name], tokens)
        write_pgm(base + ".pgm", maps[name])
        written += [base + ".json", base + ".pgm"]
    return written
