"""Dense tensor primitives used by the parser.

Tensors are plain ``torch.Tensor`` objects; reverse-mode gradients come from
torch autograd, whose tape is rebuilt on every forward pass. Each primitive
validates shapes up front so that errors name the offending operands.

:func:`grad_check` compares autograd gradients against central finite
differences and does not rely on autograd for the numerical side.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import torch

from .errors import DimensionError, InputError, NumericError, RankError

Tensor = torch.Tensor

PRECISIONS = {"float64": torch.float64, "float32": torch.float32}


def dtype_for(precision: str) -> torch.dtype:
    try:
        return PRECISIONS[precision]
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}, expected one of {sorted(PRECISIONS)}")


def _shape(t):
    return tuple(t.shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.dim() < 2 or b.dim() < 2:
        raise RankError(f"matmul needs tensors of rank >= 2, got {_shape(a)} and {_shape(b)}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {_shape(a)} x {_shape(b)}")
    return a @ b


def masked_softmax(scores: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    """Softmax over the last axis restricted to positions where ``mask`` is true.

    Rows with no unmasked position come out as all zeros instead of NaN.
    """
    if mask is None:
        shifted = scores - scores.max(dim=-1, keepdim=True).values.detach()
        e = torch.exp(shifted)
        return e / e.sum(dim=-1, keepdim=True)
    mask = mask.expand_as(scores)
    neg_inf = torch.tensor(float("-inf"), dtype=scores.dtype)
    row_max = torch.where(mask, scores, neg_inf).max(dim=-1, keepdim=True).values
    row_max = torch.where(torch.isfinite(row_max), row_max, torch.zeros_like(row_max)).detach()
    e = torch.exp((scores - row_max).masked_fill(~mask, float("-inf")))
    denom = e.sum(dim=-1, keepdim=True)
    return e / torch.where(denom > 0, denom, torch.ones_like(denom))


def softmax_rows(m: Tensor) -> Tensor:
    if m.dim() != 2:
        raise RankError(f"softmax_rows expects a 2-D tensor, got shape {_shape(m)}")
    return masked_softmax(m)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"elementwise_mul shape mismatch: {_shape(a)} vs {_shape(b)}")
    return a * b


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"add shape mismatch: {_shape(a)} vs {_shape(b)}")
    return a + b


def concat_last_dim(a: Tensor, b: Tensor) -> Tensor:
    if a.dim() != b.dim() or a.shape[:-1] != b.shape[:-1]:
        raise DimensionError(f"concat_last_dim leading dimensions differ: {_shape(a)} vs {_shape(b)}")
    if b.shape[-1] == 0:
        return a
    if a.shape[-1] == 0:
        return b
    return torch.cat([a, b], dim=-1)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` laid out as (out, in)."""
    if weight.dim() != 2:
        raise RankError(f"linear weight must be 2-D, got {_shape(weight)}")
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear input width {x.shape[-1]} does not match weight {_shape(weight)}")
    out = x @ weight.transpose(0, 1)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise DimensionError(f"linear bias {_shape(bias)} does not match weight {_shape(weight)}")
        out = out + bias
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    if gamma.shape != x.shape[-1:] or beta.shape != x.shape[-1:]:
        raise DimensionError(f"layer_norm parameters {_shape(gamma)}/{_shape(beta)} do not match input {_shape(x)}")
    mean = x.mean(dim=-1, keepdim=True)
    centered = x - mean
    var = (centered * centered).mean(dim=-1, keepdim=True)
    return centered / torch.sqrt(var + eps) * gamma + beta


def relu(x: Tensor) -> Tensor:
    return torch.clamp_min(x, 0.0)


def embedding(ids: Tensor, table: Tensor) -> Tensor:
    if ids.dtype not in (torch.int64, torch.int32):
        raise InputError(f"embedding ids must be integers, got {ids.dtype}")
    if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= table.shape[0]):
        raise InputError(f"embedding id out of range [0, {table.shape[0]})")
    return table[ids]


def dropout(x: Tensor, p: float, training: bool, generator: Optional[torch.Generator] = None) -> Tensor:
    """Inverted dropout. Outside training (or with ``p == 0``) returns ``x`` itself."""
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype) >= p
    return x * keep / (1.0 - p)


def log_softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(dim=-1, keepdim=True).values.detach()
    return shifted - torch.log(torch.exp(shifted).sum(dim=-1, keepdim=True))


def cross_entropy(logits: Tensor, targets: Tensor, ignore_index: Optional[int] = None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under ``logits`` (..., V)."""
    if logits.shape[:-1] != targets.shape:
        raise DimensionError(f"cross_entropy logits {_shape(logits)} do not match targets {_shape(targets)}")
    logp = log_softmax(logits)
    if ignore_index is None:
        keep = torch.ones_like(targets, dtype=torch.bool)
    else:
        keep = targets != ignore_index
    safe = torch.where(keep, targets, torch.zeros_like(targets))
    picked = logp.gather(-1, safe.unsqueeze(-1)).squeeze(-1)
    count = keep.sum()
    if int(count) == 0:
        raise InputError("cross_entropy has no non-ignored targets")
    return -(picked * keep).sum() / count


@dataclass
class GradReport:
    max_rel_error: float
    op_name: str
    probe_count: int

    def __str__(self):
        return f"{self.op_name}: max relative error {self.max_rel_error:.3e} over {self.probe_count} probes"


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-6,
    probes: int = 20,
    seed: int = 0,
    op_name: str = "f",
) -> GradReport:
    """Check the autograd gradient of scalar ``f`` at ``x`` by central differences.

    ``probes`` coordinates are drawn at random (all of them when ``x`` is
    smaller). The relative error at a coordinate is
    ``|g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8)``.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    base = x.detach().clone()
    if not torch.isfinite(base).all():
        raise NumericError(f"{op_name}: input contains NaN or Inf")

    leaf = base.clone().requires_grad_(True)
    out = f(leaf)
    if out.numel() != 1:
        raise DimensionError(f"{op_name}: grad_check needs a scalar output, got shape {_shape(out)}")
    if not torch.isfinite(out).all():
        raise NumericError(f"{op_name}: forward value is not finite")
    (grad,) = torch.autograd.grad(out, leaf, allow_unused=True)
    if grad is None:
        grad = torch.zeros_like(base)
    if not torch.isfinite(grad).all():
        raise NumericError(f"{op_name}: gradient contains NaN or Inf")

    n = base.numel()
    gen = torch.Generator().manual_seed(seed)
    if n <= probes:
        coords = torch.arange(n)
    else:
        coords = torch.randperm(n, generator=gen)[:probes]

    flat_grad = grad.reshape(-1)
    worst = 0.0
    with torch.no_grad():
        for idx in coords.tolist():
            plus = base.clone()
            plus.view(-1)[idx] += eps
            minus = base.clone()
            minus.view(-1)[idx] -= eps
            f_plus = float(f(plus))
            f_minus = float(f(minus))
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericError(f"{op_name}: perturbed forward value is not finite")
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            g_ad = float(flat_grad[idx])
            denom = max(abs(g_ad), abs(g_fd), 1e-8)
            worst = max(worst, abs(g_ad - g_fd) / denom)
    return GradReport(max_rel_error=worst, op_name=op_name, probe_count=len(coords))
