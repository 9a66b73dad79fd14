"""Contrastive encoder pretraining on paired ECG/report data.

Both towers project into a shared space; training pulls each pair together
and pushes non-pairs apart with a symmetric InfoNCE objective over the
in-batch similarity matrix.  The temperature is learnable, parameterized
in log space so it stays positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import Tensor, nn

from ..encoder import EcgEncoder
from ..fusion.lm import WordTokenizer
from ..records import CanonicalRecord

DEFAULT_TEMPERATURE = 0.07


class TextTower(nn.Module):
    """Mean-pooled word embeddings with a projection; a deliberately small
    stand-in for a frozen provider encoder."""

    def __init__(self, tokenizer: WordTokenizer, d_out: int, d_embed: int = 64):
        super().__init__()
        self.tokenizer = tokenizer
        self.table = nn.Embedding(len(tokenizer), d_embed, padding_idx=tokenizer.pad_id)
        self.proj = nn.Linear(d_embed, d_out)
        nn.init.normal_(self.table.weight, std=0.1)

    def forward(self, texts: list[str]) -> Tensor:
        rows = [self.tokenizer.encode(t) or [self.tokenizer.unk_id] for t in texts]
        longest = max(len(r) for r in rows)
        ids = torch.full((len(rows), longest), self.tokenizer.pad_id, dtype=torch.long)
        for i, r in enumerate(rows):
            ids[i, :len(r)] = torch.tensor(r)
        emb = self.table(ids)
        lengths = (ids != self.tokenizer.pad_id).sum(dim=1, keepdim=True).clamp(min=1)
        return self.proj(emb.sum(dim=1) / lengths)


def info_nce(ecg: Tensor, text: Tensor, temperature: Tensor | float) -> Tensor:
    """Symmetric InfoNCE; row i of each matrix is one positive pair."""
    if ecg.shape[0] < 2:
        raise ValueError("contrastive batches need at least 2 pairs")
    e = nn.functional.normalize(ecg, dim=-1)
    t = nn.functional.normalize(text, dim=-1)
    logits = (e @ t.T) / temperature
    labels = torch.arange(e.shape[0])
    return (nn.functional.cross_entropy(logits, labels)
            + nn.functional.cross_entropy(logits.T, labels)) / 2


class ContrastiveModel(nn.Module):
    def __init__(self, encoder: EcgEncoder, text_tower: TextTower,
                 temperature: float = DEFAULT_TEMPERATURE):
        super().__init__()
        self.encoder = encoder
        self.text_tower = text_tower
        self.ecg_proj = nn.Linear(encoder.config.width, encoder.config.width)
        self.log_inv_temp = nn.Parameter(torch.tensor(math.log(1.0 / temperature)))

    @property
    def temperature(self) -> Tensor:
        return torch.exp(-self.log_inv_temp)

    def embed_ecg(self, signals: Tensor) -> Tensor:
        cls, _ = self.encoder(signals)
        return self.ecg_proj(cls)

    def embed_text(self, texts: list[str]) -> Tensor:
        return self.text_tower(texts)

    def pair_loss(self, signals: Tensor, texts: list[str]) -> Tensor:
        return info_nce(self.embed_ecg(signals), self.embed_text(texts),
                        self.temperature)


@dataclass
class ContrastiveResult:
    model: ContrastiveModel
    losses: list[float] = field(default_factory=list)


def _signal_batch(records: list[CanonicalRecord]) -> Tensor:
    import numpy as np

    return torch.from_numpy(np.stack([r.signal for r in records]))


def contrastive_pretrain(pairs: list[tuple[CanonicalRecord, str]],
                         encoder: EcgEncoder | None = None,
                         epochs: int = 1, batch_size: int = 8, lr: float = 1e-3,
                         temperature: float = DEFAULT_TEMPERATURE,
                         seed: int = 0) -> ContrastiveResult:
    """Train both towers on (record, report) pairs; returns the fitted model."""
    if batch_size < 2:
        raise ValueError("contrastive batches need at least 2 pairs")
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs")
    torch.manual_seed(seed)
    if encoder is None:
        encoder = EcgEncoder()
    tokenizer = WordTokenizer.from_corpus([text for _, text in pairs])
    model = ContrastiveModel(encoder, TextTower(tokenizer, encoder.config.width),
                             temperature)
    optimizer = torch.optim.AdamW(model.parameters(), lr=lr)
    order_rng = torch.Generator().manual_seed(seed)
    losses: list[float] = []
    for _ in range(epochs):
        order = torch.randperm(len(pairs), generator=order_rng).tolist()
        for i in range(0, len(order), batch_size):
            chunk = order[i:i + batch_size]
            if len(chunk) < 2:
                continue
            records = [pairs[j][0] for j in chunk]
            texts = [pairs[j][1] for j in chunk]
            loss = model.pair_loss(_signal_batch(records), texts)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
    return ContrastiveResult(model=model, losses=losses)


@torch.no_grad()
def retrieval_recall_at_1(model: ContrastiveModel,
                          pairs: list[tuple[CanonicalRecord, str]]) -> float:
    """Fraction of ECGs whose nearest text embedding is their own report."""
    e = nn.functional.normalize(model.embed_ecg(_signal_batch([r for r, _ in pairs])), dim=-1)
    t = nn.functional.normalize(model.embed_text([txt for _, txt in pairs]), dim=-1)
    hits = (e @ t.T).argmax(dim=1) == torch.arange(len(pairs))
    return float(hits.float().mean())
