"""Dynamic ECG input assembly: encoder outputs -> delimited LM embedding stream.

A record of any duration is zero-padded to a whole number of 10 s clips,
each clip is encoded separately, the per-clip CLS vectors are averaged and
the patch tokens concatenated in time order.  After the connector projects
them into LM space, each ECG occupies one contiguous block

    <ECG_start>  averaged-CLS  patch tokens...  <ECG_end>

spliced into the text stream at its placeholder position.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import Tensor, nn

from ..encoder import EcgEncoder
from ..records import CLIP_SAMPLES, CanonicalRecord
from .connector import Connector
from .lm import ASSISTANT, ECG_PLACEHOLDER, USER, ToyLm, WordTokenizer

ECG_START = "<ECG_start>"
ECG_END = "<ECG_end>"

# pseudo-ids used only in assembled-position bookkeeping, outside the LM vocab
ECG_CONTENT_ID = -1


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str

    def __post_init__(self):
        if self.role not in ("user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass
class EcgBundle:
    blocks: list[Tensor]
    clip_counts: list[int]

    def __post_init__(self):
        if len(self.blocks) != len(self.clip_counts):
            raise ValueError("one clip count per block required")


@dataclass
class AssembledPrompt:
    """Mixed embedding sequence plus per-position bookkeeping.

    ``token_ids`` holds the text-token id at text positions, the start/end
    pseudo-ids at delimiter positions, and -1 inside ECG blocks.  ``targets``
    holds the next-token id at positions whose prediction is trained (answer
    words and the answer terminator) and -100 everywhere else.
    """

    embeddings: Tensor
    token_ids: list[int]
    targets: list[int]

    def __len__(self) -> int:
        return self.embeddings.shape[0]


class EcgChatModel(nn.Module):
    """Encoder + connector + decoder LM glued by the dynamic ECG input rules."""

    def __init__(self, encoder: EcgEncoder, lm: ToyLm, tokenizer: WordTokenizer,
                 feed: str = "both"):
        super().__init__()
        if feed not in ("both", "cls", "patches"):
            raise ValueError(f"unknown feed mode {feed!r}")
        self.encoder = encoder
        self.lm = lm
        self.tokenizer = tokenizer
        self.feed = feed
        self.connector = Connector(encoder.config.width, lm.d_model)
        self.special_embeddings = nn.Parameter(torch.zeros(2, lm.d_model))
        nn.init.trunc_normal_(self.special_embeddings, std=0.02)

    @property
    def start_id(self) -> int:
        return self.lm.vocab_size

    @property
    def end_id(self) -> int:
        return self.lm.vocab_size + 1

    def clip_batch(self, rec: CanonicalRecord) -> Tensor:
        """Zero-pad to a whole number of clips and stack them: (k, 12, 1000)."""
        n = rec.n_samples
        k = max(1, math.ceil(n / CLIP_SAMPLES))
        padded = np.zeros((12, k * CLIP_SAMPLES), dtype=np.float32)
        padded[:, :n] = rec.signal
        clips = padded.reshape(12, k, CLIP_SAMPLES).transpose(1, 0, 2)
        return torch.from_numpy(clips.copy())

    def encode_dynamic(self, rec: CanonicalRecord) -> tuple[Tensor, Tensor]:
        """Any-duration record -> (averaged cls (D,), patch tokens (60k, D))."""
        clips = self.clip_batch(rec)
        cls, patches = self.encoder(clips)
        return cls.mean(dim=0), patches.reshape(-1, patches.shape[-1])

    def ecg_block(self, rec: CanonicalRecord) -> tuple[Tensor, int]:
        """Project one record into its in-prompt block; returns (m x D_lm, k)."""
        cls, patches = self.encode_dynamic(rec)
        k = patches.shape[0] // self.encoder.config.patches_per_clip
        if self.feed == "cls":
            tokens = cls[None, :]
        elif self.feed == "patches":
            tokens = patches
        else:
            tokens = torch.cat([cls[None, :], patches], dim=0)
        return self.connector(tokens), k

    def bundle(self, records: list[CanonicalRecord]) -> EcgBundle:
        blocks, counts = [], []
        for rec in records:
            block, k = self.ecg_block(rec)
            blocks.append(block)
            counts.append(k)
        return EcgBundle(blocks=blocks, clip_counts=counts)

    def assemble_prompt(self, messages: list[ChatMessage], bundle: EcgBundle | None = None,
                        add_generation_prompt: bool = False) -> AssembledPrompt:
        """Interleave chat text with delimited ECG blocks at placeholder positions."""
        blocks = list(bundle.blocks) if bundle is not None else []
        placeholder_total = sum(m.text.split().count(ECG_PLACEHOLDER) for m in messages)
        if placeholder_total != len(blocks):
            raise ValueError(f"{placeholder_total} ECG placeholders for {len(blocks)} ECGs")

        tok = self.tokenizer
        pieces: list[Tensor] = []
        token_ids: list[int] = []
        trained: list[bool] = []  # whether this position's token is an answer token
        next_block = 0

        def push_text(ids: list[int], answer: bool):
            if not ids:
                return
            pieces.append(self.lm.embed(torch.tensor(ids, dtype=torch.long)))
            token_ids.extend(ids)
            trained.extend([answer] * len(ids))

        for msg in messages:
            role_id = tok.ids[USER if msg.role == "user" else ASSISTANT]
            answer = msg.role == "assistant"
            push_text([role_id], answer=False)
            for word in msg.text.split():
                if word == ECG_PLACEHOLDER:
                    block = blocks[next_block]
                    next_block += 1
                    pieces.append(self.special_embeddings[0:1])
                    pieces.append(block)
                    pieces.append(self.special_embeddings[1:2])
                    token_ids.extend([self.start_id] + [ECG_CONTENT_ID] * block.shape[0]
                                     + [self.end_id])
                    trained.extend([False] * (block.shape[0] + 2))
                else:
                    push_text([tok.ids.get(word, tok.unk_id)], answer=answer)
            push_text([tok.eos_id], answer=answer)
        if add_generation_prompt:
            push_text([tok.ids[ASSISTANT]], answer=False)

        embeddings = torch.cat(pieces, dim=0)
        targets = [token_ids[i + 1] if trained[i + 1] and token_ids[i + 1] >= 0 else -100
                   for i in range(len(token_ids) - 1)] + [-100]
        return AssembledPrompt(embeddings=embeddings, token_ids=token_ids, targets=targets)

    def batch_loss(self, prompts: list[AssembledPrompt]) -> Tensor:
        """Padded-batch cross-entropy over answer-token targets only."""
        pad_embed = self.lm.embed(torch.tensor([self.tokenizer.pad_id]))[0]
        longest = max(len(p) for p in prompts)
        rows, target_rows = [], []
        for p in prompts:
            gap = longest - len(p)
            rows.append(torch.cat([p.embeddings, pad_embed.expand(gap, -1)], dim=0))
            target_rows.append(p.targets + [-100] * gap)
        logits = self.lm(torch.stack(rows))
        targets = torch.tensor(target_rows, dtype=torch.long)
        return nn.functional.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=-100)

    @torch.no_grad()
    def generate(self, messages: list[ChatMessage], records: list[CanonicalRecord] | None = None,
                 max_new: int = 32, mode: str = "greedy", temperature: float = 1.0,
                 seed: int | None = None) -> str:
        if mode not in ("greedy", "sampled"):
            raise ValueError(f"unknown decode mode {mode!r}")
        bundle = self.bundle(records) if records else None
        prompt = self.assemble_prompt(messages, bundle, add_generation_prompt=True)
        seq = prompt.embeddings
        gen = None
        if mode == "sampled":
            gen = torch.Generator().manual_seed(0 if seed is None else seed)
        out_ids: list[int] = []
        for _ in range(max_new):
            if seq.shape[0] >= self.lm.max_len:
                raise ValueError(f"context length {self.lm.max_len} exceeded")
            logits = self.lm(seq.unsqueeze(0))[0, -1]
            if mode == "greedy":
                next_id = int(logits.argmax())
            else:
                probs = torch.softmax(logits / max(temperature, 1e-6), dim=-1)
                next_id = int(torch.multinomial(probs, 1, generator=gen))
            if next_id == self.tokenizer.eos_id:
                break
            out_ids.append(next_id)
            seq = torch.cat([seq, self.lm.embed(torch.tensor([next_id]))], dim=0)
        return self.tokenizer.decode(out_ids)

    def parameter_groups(self) -> dict[str, list[tuple[str, nn.Parameter]]]:
        """Named parameters split into the curriculum's trainable units."""
        groups: dict[str, list[tuple[str, nn.Parameter]]] = {
            "encoder": [], "connector": [], "lora": [], "lm": []}
        for name, param in self.named_parameters():
            if name.startswith("encoder."):
                groups["encoder"].append((name, param))
            elif name.startswith("connector.") or name == "special_embeddings":
                groups["connector"].append((name, param))
            elif ".adapter." in name:
                groups["lora"].append((name, param))
            else:
                groups["lm"].append((name, param))
        return groups


def model_manifest(model: EcgChatModel) -> dict:
    """Everything needed to rebuild the architecture before loading weights."""
    return {
        "encoder": asdict(model.encoder.config),
        "lm": asdict(model.lm.config),
        "vocab": list(model.tokenizer.vocab),
        "feed": model.feed,
    }


def model_from_manifest(manifest: dict) -> EcgChatModel:
    from ..encoder import EncoderConfig
    from .lm import SPECIAL_TOKENS, LmConfig

    vocab = manifest["vocab"]
    if list(vocab[:len(SPECIAL_TOKENS)]) != list(SPECIAL_TOKENS):
        raise ValueError("manifest vocabulary does not begin with the special tokens")
    tokenizer = WordTokenizer(vocab[len(SPECIAL_TOKENS):])
    encoder = EcgEncoder(EncoderConfig(**manifest["encoder"]))
    lm = ToyLm(LmConfig(**manifest["lm"]))
    if lm.vocab_size != len(tokenizer):
        raise ValueError("manifest LM vocabulary size does not match its word list")
    return EcgChatModel(encoder, lm, tokenizer, feed=manifest["feed"])
