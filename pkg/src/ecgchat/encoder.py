"""ViT-style ECG encoder.

A canonical 10 s clip (12 leads x 1000 samples at 100 Hz) is cut into
spatio-temporal patches of one lead by 200 samples, giving 5 patches per
lead and 60 patches per clip.  Each patch embedding is the sum of a linear
projection of its raw samples, a temporal position embedding shared across
leads, and a lead embedding shared across time.  A CLS token is prepended
and the sequence runs through pre-norm transformer blocks:

    z'_l = MSA(LN(z_{l-1})) + z_{l-1}
    z_l  = FFN(LN(z'_l)) + z'_l

The pooled clip representation is y = LN(z_L^0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import Tensor, nn

from .records import CLIP_SAMPLES, CanonicalRecord


@dataclass(frozen=True)
class EncoderConfig:
    depth: int = 2
    width: int = 64
    heads: int = 4
    patch_len: int = 200
    max_leads: int = 12
    max_patches_per_lead: int = 5
    mlp_ratio: int = 4

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ValueError(f"width {self.width} not divisible by heads {self.heads}")
        if self.patch_len * self.max_patches_per_lead != CLIP_SAMPLES:
            raise ValueError("patch grid must tile a 10 s clip at 100 Hz "
                             f"({self.patch_len} x {self.max_patches_per_lead} != {CLIP_SAMPLES})")
        if self.depth < 0 or self.width < 1 or self.heads < 1 or self.mlp_ratio < 1:
            raise ValueError("non-positive encoder dimension")

    @classmethod
    def vit_base(cls) -> "EncoderConfig":
        """Full-scale configuration; the default above is its desk-scale twin."""
        return cls(depth=12, width=768, heads=12)

    @property
    def patches_per_clip(self) -> int:
        return self.max_leads * self.max_patches_per_lead


@dataclass
class PatchSequence:
    """Embedded patch tokens with CLS at row 0; index -1 marks the CLS row."""

    tokens: Tensor
    lead_index: Tensor
    pos_index: Tensor

    def __post_init__(self):
        if self.tokens.ndim != 2 or self.tokens.shape[0] != self.lead_index.shape[0]:
            raise ValueError("tokens and index vectors disagree")
        if int(self.lead_index[0]) != -1 or int(self.pos_index[0]) != -1:
            raise ValueError("row 0 must be the CLS token")

    @property
    def n(self) -> int:
        return self.tokens.shape[0] - 1


@dataclass
class EcgEmbedding:
    cls: Tensor
    patch_tokens: Tensor


class TransformerBlock(nn.Module):
    """Pre-norm block: multi-head self-attention then a GELU feed-forward."""

    def __init__(self, width: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.norm1 = nn.LayerNorm(width)
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, mlp_ratio * width),
            nn.GELU(),
            nn.Linear(mlp_ratio * width, width),
        )

    def attend(self, x: Tensor) -> Tensor:
        b, s, d = x.shape
        qkv = self.qkv(x).reshape(b, s, 3, self.heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, s, d)
        return self.proj(out)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attend(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class EcgEncoder(nn.Module):
    def __init__(self, config: EncoderConfig | None = None):
        super().__init__()
        self.config = config or EncoderConfig()
        cfg = self.config
        # strictly linear so an all-zero patch contributes nothing
        self.signal_proj = nn.Linear(cfg.patch_len, cfg.width, bias=False)
        self.cls_token = nn.Parameter(torch.zeros(cfg.width))
        self.lead_table = nn.Parameter(torch.zeros(cfg.max_leads, cfg.width))
        self.pos_table = nn.Parameter(torch.zeros(cfg.max_patches_per_lead, cfg.width))
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.width, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth))
        self.final_norm = nn.LayerNorm(cfg.width)
        self._init_weights()

    def _init_weights(self):
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        nn.init.trunc_normal_(self.lead_table, std=0.02)
        nn.init.trunc_normal_(self.pos_table, std=0.02)

    def embed_patches(self, signal: Tensor) -> Tensor:
        """(B, 12, 1000) float signal -> (B, 60, D) patch embeddings."""
        cfg = self.config
        b = signal.shape[0]
        if signal.shape[1:] != (cfg.max_leads, CLIP_SAMPLES):
            raise ValueError(f"expected (B, {cfg.max_leads}, {CLIP_SAMPLES}) clip, "
                             f"got {tuple(signal.shape)}")
        patches = signal.reshape(b, cfg.max_leads, cfg.max_patches_per_lead, cfg.patch_len)
        e_signal = self.signal_proj(patches)
        e = e_signal + self.pos_table[None, None, :, :] + self.lead_table[None, :, None, :]
        return e.reshape(b, cfg.patches_per_clip, cfg.width)

    def patchify(self, rec: CanonicalRecord) -> PatchSequence:
        """Embed one canonical 10 s clip and prepend the CLS token."""
        if rec.n_samples != CLIP_SAMPLES:
            raise ValueError(f"clip must have {CLIP_SAMPLES} samples, got {rec.n_samples}")
        signal = torch.from_numpy(rec.signal).to(self.cls_token.dtype).unsqueeze(0)
        tokens = torch.cat([self.cls_token[None, None, :], self.embed_patches(signal)], dim=1)[0]
        cfg = self.config
        lead_idx = torch.arange(cfg.max_leads).repeat_interleave(cfg.max_patches_per_lead)
        pos_idx = torch.arange(cfg.max_patches_per_lead).repeat(cfg.max_leads)
        minus_one = torch.tensor([-1])
        return PatchSequence(tokens=tokens,
                             lead_index=torch.cat([minus_one, lead_idx]),
                             pos_index=torch.cat([minus_one, pos_idx]))

    def run_blocks(self, tokens: Tensor) -> Tensor:
        for block in self.blocks:
            tokens = block(tokens)
        return tokens

    def encode_clip(self, p: PatchSequence) -> EcgEmbedding:
        z = self.run_blocks(p.tokens.unsqueeze(0))[0]
        return EcgEmbedding(cls=self.final_norm(z[0]), patch_tokens=z[1:])

    def forward(self, signal: Tensor) -> tuple[Tensor, Tensor]:
        """Batched clip encode: (B, 12, 1000) -> cls (B, D), patches (B, 60, D)."""
        tokens = self.embed_patches(signal)
        cls = self.cls_token[None, None, :].expand(tokens.shape[0], 1, -1)
        z = self.run_blocks(torch.cat([cls, tokens], dim=1))
        return self.final_norm(z[:, 0]), z[:, 1:]

    def lead_position_tables(self) -> tuple[Tensor, Tensor]:
        return self.lead_table, self.pos_table
