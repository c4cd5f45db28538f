"""Parameterized building blocks over the primitives in :mod:`depsem.tensor`."""

import math

import torch
from torch import nn

from . import tensor as T


class Linear(nn.Module):
    def __init__(self, in_dim, out_dim, bias=True):
        super().__init__()
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = nn.Parameter(torch.empty(out_dim, in_dim))
        self.bias = nn.Parameter(torch.empty(out_dim)) if bias else None

    def reset_parameters(self, generator):
        bound = 1.0 / math.sqrt(self.in_dim)
        with torch.no_grad():
            self.weight.uniform_(-bound, bound, generator=generator)
            if self.bias is not None:
                self.bias.uniform_(-bound, bound, generator=generator)

    def forward(self, x):
        return T.linear(x, self.weight, self.bias)


class LayerNorm(nn.Module):
    def __init__(self, dim, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(dim))
        self.beta = nn.Parameter(torch.zeros(dim))

    def reset_parameters(self, generator):
        with torch.no_grad():
            self.gamma.fill_(1.0)
            self.beta.zero_()

    def forward(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(nn.Module):
    def __init__(self, num, dim):
        super().__init__()
        self.dim = dim
        self.weight = nn.Parameter(torch.empty(num, dim))

    def reset_parameters(self, generator):
        bound = 1.0 / math.sqrt(self.dim)
        with torch.no_grad():
            self.weight.uniform_(-bound, bound, generator=generator)

    def forward(self, ids):
        return T.embedding(ids, self.weight)


class Dropout(nn.Module):
    """Dropout drawing its masks from a generator owned by the model."""

    def __init__(self, p, generator=None):
        super().__init__()
        self.p = p
        self.generator = generator

    def forward(self, x):
        return T.dropout(x, self.p, self.training, self.generator)


def sinusoidal_positions(length, dim, dtype=torch.float64):
    pos = torch.arange(length, dtype=torch.float64)[:, None]
    i = torch.arange(0, dim, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, i / dim)
    pe = torch.zeros(length, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle[:, : dim // 2])
    return pe.to(dtype)


def reset_all(module: nn.Module, generator: torch.Generator):
    """Initialize every block in registration order from one generator."""
    for sub in module.modules():
        if isinstance(sub, (Linear, LayerNorm, Embedding)):
            sub.reset_parameters(generator)
