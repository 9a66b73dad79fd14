"""Encoder-to-LM fusion: connector, adapters, tokenizer, toy LM, assembly."""

from .connector import Connector
from .lm import (
    ASSISTANT,
    ECG_PLACEHOLDER,
    EOS,
    PAD,
    SPECIAL_TOKENS,
    UNK,
    USER,
    CausalBlock,
    LmConfig,
    LmInterface,
    ToyLm,
    WordTokenizer,
)
from .lora import (
    DEFAULT_ALPHA,
    DEFAULT_RANK,
    LoraAdapter,
    LoraLinear,
    inject_lora,
    lora_parameters,
    merge_lora,
)
from .model import (
    ECG_CONTENT_ID,
    ECG_END,
    ECG_START,
    AssembledPrompt,
    ChatMessage,
    EcgBundle,
    EcgChatModel,
    model_from_manifest,
    model_manifest,
)

__all__ = [
    "ASSISTANT",
    "AssembledPrompt",
    "CausalBlock",
    "ChatMessage",
    "Connector",
    "DEFAULT_ALPHA",
    "DEFAULT_RANK",
    "ECG_CONTENT_ID",
    "ECG_END",
    "ECG_PLACEHOLDER",
    "ECG_START",
    "EOS",
    "EcgBundle",
    "EcgChatModel",
    "model_from_manifest",
    "model_manifest",
    "LmConfig",
    "LmInterface",
    "LoraAdapter",
    "LoraLinear",
    "PAD",
    "SPECIAL_TOKENS",
    "ToyLm",
    "UNK",
    "USER",
    "WordTokenizer",
    "inject_lora",
    "lora_parameters",
    "merge_lora",
]
