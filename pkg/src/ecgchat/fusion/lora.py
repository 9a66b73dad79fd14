"""Low-rank adapters for attention query/key projections.

An adapter adds ``(alpha / rank) * B @ A`` on top of a frozen base weight.
``B`` starts at zero, so a freshly injected model computes exactly what the
base model did; training moves only ``A`` and ``B``.
"""

from __future__ import annotations

import math

import torch
from torch import Tensor, nn

DEFAULT_RANK = 8
DEFAULT_ALPHA = 16.0
DEFAULT_TARGETS = ("q_proj", "k_proj")


class LoraAdapter(nn.Module):
    def __init__(self, d_in: int, d_out: int, rank: int = DEFAULT_RANK,
                 alpha: float = DEFAULT_ALPHA):
        super().__init__()
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.rank = rank
        self.alpha = alpha
        self.lora_A = nn.Parameter(torch.empty(rank, d_in))
        self.lora_B = nn.Parameter(torch.zeros(d_out, rank))
        nn.init.kaiming_uniform_(self.lora_A, a=math.sqrt(5))

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def delta(self) -> Tensor:
        return self.scale * (self.lora_B @ self.lora_A)

    def forward(self, x: Tensor) -> Tensor:
        return self.scale * ((x @ self.lora_A.T) @ self.lora_B.T)


class LoraLinear(nn.Module):
    """Frozen linear layer plus a trainable low-rank bypass."""

    def __init__(self, base: nn.Linear, rank: int = DEFAULT_RANK,
                 alpha: float = DEFAULT_ALPHA):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.adapter = LoraAdapter(base.in_features, base.out_features, rank, alpha)

    def forward(self, x: Tensor) -> Tensor:
        return self.base(x) + self.adapter(x)

    def merged(self) -> nn.Linear:
        out = nn.Linear(self.base.in_features, self.base.out_features,
                        bias=self.base.bias is not None)
        with torch.no_grad():
            out.weight.copy_(self.base.weight + self.adapter.delta())
            if self.base.bias is not None:
                out.bias.copy_(self.base.bias)
        return out


def inject_lora(module: nn.Module, rank: int = DEFAULT_RANK, alpha: float = DEFAULT_ALPHA,
                targets: tuple[str, ...] = DEFAULT_TARGETS) -> list[str]:
    """Wrap every target projection in ``module`` with an adapter, in place."""
    wrapped: list[str] = []
    for name, child in list(module.named_modules()):
        if not isinstance(child, nn.Linear):
            continue
        leaf = name.rsplit(".", 1)[-1]
        if leaf not in targets:
            continue
        parent = module
        if "." in name:
            parent = module.get_submodule(name.rsplit(".", 1)[0])
        setattr(parent, leaf, LoraLinear(child, rank, alpha))
        wrapped.append(name)
    if not wrapped:
        raise ValueError(f"no projections matching {targets} found")
    return wrapped


def merge_lora(module: nn.Module) -> list[str]:
    """Fold every adapter into its base weight, leaving plain linear layers."""
    merged: list[str] = []
    for name, child in list(module.named_modules()):
        if not isinstance(child, LoraLinear):
            continue
        parent = module
        if "." in name:
            parent = module.get_submodule(name.rsplit(".", 1)[0])
        setattr(parent, name.rsplit(".", 1)[-1], child.merged())
        merged.append(name)
    return merged


def lora_parameters(module: nn.Module):
    for submodule in module.modules():
        if isinstance(submodule, LoraAdapter):
            yield from submodule.parameters()
