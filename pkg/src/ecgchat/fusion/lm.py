"""Word-level tokenizer and the desk-scale decoder LM.

The LM is deliberately small but keeps the structure larger decoders share:
token + position embeddings, pre-norm causal blocks with separately named
query/key/value projections (so low-rank adapters can wrap them by name),
a final norm, and a vocabulary head.  Anything exposing the same surface
(``vocab_size``, ``d_model``, ``embed``, ``forward``, ``attention_projections``)
can stand in for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol, runtime_checkable

import torch
from torch import Tensor, nn

PAD, UNK, EOS, USER, ASSISTANT, ECG_PLACEHOLDER = SPECIAL_TOKENS = (
    "<pad>", "<unk>", "<eos>", "<user>", "<assistant>", "<ECG>")


class WordTokenizer:
    """Whitespace tokenizer over a fixed vocabulary; specials occupy ids 0-5."""

    def __init__(self, words: Iterable[str]):
        vocab = list(SPECIAL_TOKENS)
        seen = set(vocab)
        for w in words:
            if w and not w.isspace() and w not in seen:
                seen.add(w)
                vocab.append(w)
        self.vocab = vocab
        self.ids = {w: i for i, w in enumerate(vocab)}

    @classmethod
    def from_corpus(cls, texts: Iterable[str]) -> "WordTokenizer":
        words = sorted({w for t in texts for w in t.split()} - set(SPECIAL_TOKENS))
        return cls(words)

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    def encode(self, text: str) -> list[int]:
        return [self.ids.get(w, self.unk_id) for w in text.split()]

    def decode(self, ids: Iterable[int]) -> str:
        words = []
        for i in ids:
            if i == self.eos_id:
                break
            if i != self.pad_id:
                words.append(self.vocab[i])
        return " ".join(words)


@runtime_checkable
class LmInterface(Protocol):
    vocab_size: int
    d_model: int
    max_len: int

    def embed(self, ids: Tensor) -> Tensor: ...

    def forward(self, embeddings: Tensor) -> Tensor: ...

    def attention_projections(self) -> dict[str, nn.Linear]: ...


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int
    d_model: int = 128
    depth: int = 4
    heads: int = 4
    mlp_ratio: int = 4
    max_len: int = 512

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError("d_model must be divisible by heads")
        if self.vocab_size < len(SPECIAL_TOKENS):
            raise ValueError("vocabulary smaller than the reserved special tokens")


class CausalBlock(nn.Module):
    def __init__(self, d: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.heads = heads
        self.head_dim = d // heads
        self.norm1 = nn.LayerNorm(d)
        self.q_proj = nn.Linear(d, d)
        self.k_proj = nn.Linear(d, d)
        self.v_proj = nn.Linear(d, d)
        self.o_proj = nn.Linear(d, d)
        self.norm2 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(
            nn.Linear(d, mlp_ratio * d),
            nn.GELU(),
            nn.Linear(mlp_ratio * d, d),
        )

    def attend(self, x: Tensor) -> Tensor:
        b, s, d = x.shape

        def split(t: Tensor) -> Tensor:
            return t.reshape(b, s, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        causal = torch.triu(torch.ones(s, s, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(causal, float("-inf"))
        out = (torch.softmax(scores, dim=-1) @ v).transpose(1, 2).reshape(b, s, d)
        return self.o_proj(out)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attend(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class ToyLm(nn.Module):
    """Decoder-only causal LM over mixed (token or injected) embeddings."""

    def __init__(self, config: LmConfig):
        super().__init__()
        self.config = config
        self.vocab_size = config.vocab_size
        self.d_model = config.d_model
        self.max_len = config.max_len
        self.token_table = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_table = nn.Parameter(torch.zeros(config.max_len, config.d_model))
        self.blocks = nn.ModuleList(
            CausalBlock(config.d_model, config.heads, config.mlp_ratio)
            for _ in range(config.depth))
        self.final_norm = nn.LayerNorm(config.d_model)
        self.lm_head = nn.Linear(config.d_model, config.vocab_size, bias=False)
        nn.init.trunc_normal_(self.token_table.weight, std=0.02)
        nn.init.trunc_normal_(self.pos_table, std=0.02)

    def embed(self, ids: Tensor) -> Tensor:
        return self.token_table(ids)

    def forward(self, embeddings: Tensor) -> Tensor:
        """(B, S, D) mixed embeddings -> (B, S, vocab) next-token logits."""
        if embeddings.ndim != 3:
            raise ValueError("expected a batched (B, S, D) embedding sequence")
        s = embeddings.shape[1]
        if s > self.max_len:
            raise ValueError(f"sequence of {s} tokens exceeds context length {self.max_len}")
        x = embeddings + self.pos_table[:s]
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.final_norm(x))

    def attention_projections(self) -> dict[str, nn.Linear]:
        out: dict[str, nn.Linear] = {}
        for i, block in enumerate(self.blocks):
            out[f"blocks.{i}.q_proj"] = block.q_proj
            out[f"blocks.{i}.k_proj"] = block.k_proj
        return out
