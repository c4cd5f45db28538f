"""Scaled dot-product attention and its tree-aware variants.

All four variants share one code path:

* standard:     softmax(QK^T / sqrt(d)) V
* parent-scaled: softmax((QK^T / sqrt(d)) * D) V
* constituent:  (C * softmax(QK^T / sqrt(d))) V
* combined:     (C * softmax((QK^T / sqrt(d)) * D)) V

``D`` is the Gaussian parent-proximity matrix and ``C`` the constituent prior.
Both broadcast against the score tensor (..., n_q, n_k). Masks are boolean
with ``True`` marking a visible key.
"""

import math
from typing import Optional

import torch

from .errors import DimensionError
from .tensor import Tensor, elementwise_mul, masked_softmax, matmul


def head_scores(q: Tensor, k: Tensor) -> Tensor:
    d = k.shape[-1]
    if d == 0:
        raise DimensionError("key dimension must be positive")
    if q.shape[-1] != d:
        raise DimensionError(f"query width {q.shape[-1]} differs from key width {d}")
    return matmul(q, k.transpose(-1, -2)) / math.sqrt(d)


def _broadcast(m: Tensor, like: Tensor, name: str) -> Tensor:
    try:
        return m.to(like.dtype).expand_as(like)
    except RuntimeError:
        raise DimensionError(f"{name} of shape {tuple(m.shape)} does not fit scores {tuple(like.shape)}")


def attention_weights(
    q: Tensor,
    k: Tensor,
    mask: Optional[Tensor] = None,
    dist: Optional[Tensor] = None,
    prior: Optional[Tensor] = None,
) -> Tensor:
    """Weights applied to V. Rows sum to 1 unless ``prior`` damps them."""
    scores = head_scores(q, k)
    if dist is not None:
        scores = elementwise_mul(scores, _broadcast(dist, scores, "distance matrix"))
    weights = masked_softmax(scores, mask)
    if prior is not None:
        weights = elementwise_mul(_broadcast(prior, weights, "constituent prior"), weights)
    return weights


def _attend(q, k, v, mask, dist, prior):
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"{k.shape[-2]} keys but {v.shape[-2]} values")
    return matmul(attention_weights(q, k, mask, dist, prior), v)


def standard_attention(q: Tensor, k: Tensor, v: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    return _attend(q, k, v, mask, None, None)


def pascal_attention(q: Tensor, k: Tensor, v: Tensor, dist: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    return _attend(q, k, v, mask, dist, None)


def ca_attention(q: Tensor, k: Tensor, v: Tensor, prior: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    return _attend(q, k, v, mask, None, prior)


def pascal_ca_attention(
    q: Tensor, k: Tensor, v: Tensor, dist: Tensor, prior: Tensor, mask: Optional[Tensor] = None
) -> Tensor:
    return _attend(q, k, v, mask, dist, prior)


def _safe_sqrt(x: Tensor) -> Tensor:
    pos = x > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, x, torch.ones_like(x))), torch.zeros_like(x))


def hierarchical_update(prev: Optional[Tensor], fresh: Tensor) -> Tensor:
    """``a = prev + (1 - prev) * fresh``; links never weaken going up the stack."""
    if prev is None:
        return fresh
    return prev + (1.0 - prev) * fresh


def neighbor_link_probs(
    right_scores: Tensor,
    left_scores: Tensor,
    prev: Optional[Tensor] = None,
    key_mask: Optional[Tensor] = None,
) -> Tensor:
    """Adjacent-pair link strengths for one layer.

    ``right_scores[..., i]`` scores token ``i`` attending to ``i + 1`` and
    ``left_scores[..., i]`` scores token ``i + 1`` attending to ``i``; both
    have length ``n - 1``. Each token splits probability between its (at most
    two) visible neighbours; the fresh link is the geometric mean of the two
    directed probabilities, folded into ``prev`` by :func:`hierarchical_update`.
    ``key_mask`` (..., n) hides padding, which then acts as a sequence end.
    """
    if right_scores.shape != left_scores.shape:
        raise DimensionError(f"link score shapes differ: {tuple(right_scores.shape)} vs {tuple(left_scores.shape)}")
    m = right_scores.shape[-1]
    if m == 0:
        return right_scores
    lead = right_scores.shape[:-1]
    pad = right_scores.new_zeros(lead + (1,))
    # per token: column 0 = left neighbour, column 1 = right neighbour
    to_left = torch.cat([pad, left_scores], dim=-1)
    to_right = torch.cat([right_scores, pad], dim=-1)
    logits = torch.stack([to_left, to_right], dim=-1)

    n = m + 1
    has_left = torch.arange(n) > 0
    has_right = torch.arange(n) < m
    visible = torch.stack([has_left, has_right], dim=-1).expand(lead + (n, 2))
    if key_mask is not None:
        km = key_mask.to(torch.bool)
        left_ok = torch.cat([torch.zeros_like(km[..., :1]), km[..., :-1]], dim=-1)
        right_ok = torch.cat([km[..., 1:], torch.zeros_like(km[..., :1])], dim=-1)
        visible = visible & torch.stack([left_ok & km, right_ok & km], dim=-1)
    probs = masked_softmax(logits, visible)
    p_forward = probs[..., :-1, 1]
    p_backward = probs[..., 1:, 0]
    fresh = _safe_sqrt(p_forward * p_backward)
    return hierarchical_update(prev, fresh)


def constituent_prior(links: Tensor) -> Tensor:
    """C[i, j] = prod of links[min(i,j) .. max(i,j)-1], built in log space.

    ``links`` has shape (..., n - 1); the result is (..., n, n), symmetric with
    unit diagonal. A zero link is a hard constituent boundary.
    """
    m = links.shape[-1]
    n = m + 1
    pos = links > 0
    logs = torch.where(pos, torch.log(torch.where(pos, links, torch.ones_like(links))),
                       torch.full_like(links, float("-inf")))
    i = torch.arange(n)
    k = torch.arange(m)
    lo = torch.minimum(i[:, None], i[None, :])
    hi = torch.maximum(i[:, None], i[None, :])
    span = (lo[..., None] <= k) & (k < hi[..., None])
    expanded = logs[..., None, None, :].expand(links.shape[:-1] + (n, n, m))
    total = expanded.masked_fill(~span, 0.0).sum(dim=-1)
    return torch.exp(total)
