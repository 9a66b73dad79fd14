"""Modality connector: encoder width -> LM width, Linear - GELU - Linear."""

from __future__ import annotations

from torch import Tensor, nn


class Connector(nn.Module):
    def __init__(self, d_encoder: int, d_lm: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_encoder, d_lm),
            nn.GELU(),
            nn.Linear(d_lm, d_lm),
        )

    def forward(self, tokens: Tensor) -> Tensor:
        return self.net(tokens)
