from .engine import (
    ChatEngine,
    ContextOverflowError,
    Reply,
    Session,
    Turn,
    UnknownRecordError,
    UnknownSessionError,
    load_chat_model,
    spans_to_payload,
    waveform_preview,
)
from .repl import run as run_repl
from .server import create_app

__all__ = [
    "ChatEngine",
    "ContextOverflowError",
    "Reply",
    "Session",
    "Turn",
    "UnknownRecordError",
    "UnknownSessionError",
    "load_chat_model",
    "spans_to_payload",
    "waveform_preview",
    "create_app",
    "run_repl",
]
