"""Session engine shared by the HTTP service and the terminal REPL.

Both surfaces call the same ``send``, so a seeded greedy conversation
produces identical replies no matter which surface drives it.  Sessions
are in-memory and append-only; model inference is serialized behind one
lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..checkpoint import load_checkpoint
from ..fusion import (
    ECG_PLACEHOLDER,
    ChatMessage,
    EcgChatModel,
    inject_lora,
    model_from_manifest,
)
from ..records import CANONICAL_LEADS, CanonicalRecord
from ..spans import SpanSet, parse_spans

SERVABLE_KINDS = ("stage1", "stage2", "stage3")


class UnknownSessionError(KeyError):
    pass


class UnknownRecordError(KeyError):
    pass


class ContextOverflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    ecg_refs: tuple[str, ...] = ()
    spans: SpanSet | None = None


@dataclass
class Session:
    session_id: str
    turns: list[Turn] = field(default_factory=list)


@dataclass(frozen=True)
class Reply:
    text: str
    spans: SpanSet | None


def spans_to_payload(spans: SpanSet | None) -> dict | None:
    if spans is None:
        return None
    return {"not_found": spans.not_found,
            "intervals": [[s, e] for s, e in spans.spans]}


def load_chat_model(path: str | Path) -> EcgChatModel:
    """Rebuild a servable model from a trainer checkpoint."""
    payload = load_checkpoint(path)
    if payload["kind"] not in SERVABLE_KINDS:
        raise ValueError(f"checkpoint kind {payload['kind']!r} is not servable; "
                         f"expected one of {SERVABLE_KINDS}")
    state = payload["state"]
    model = model_from_manifest(state["manifest"])
    if state.get("lora_injected"):
        inject_lora(model.lm)
    model.load_state_dict(state["model"])
    model.eval()
    return model


def waveform_preview(rec: CanonicalRecord, max_points: int = 400) -> list[dict]:
    """Per-lead decimated (t, amplitude) polylines for display."""
    idx = np.linspace(0, rec.n_samples - 1,
                      min(max_points, rec.n_samples)).round().astype(int)
    out = []
    for slot, name in enumerate(CANONICAL_LEADS):
        if not rec.lead_mask[slot]:
            continue
        points = [[round(float(i) / rec.fs, 3), round(float(rec.signal[slot, i]), 4)]
                  for i in idx]
        out.append({"lead": name, "points": points})
    return out


class ChatEngine:
    def __init__(self, model: EcgChatModel, max_new: int = 32, seed: int = 0):
        self.model = model
        self.max_new = max_new
        self.seed = seed
        self._sessions: dict[str, Session] = {}
        self._records: dict[str, CanonicalRecord] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def _next_id(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}{self._counter:04d}"

    def create_session(self) -> str:
        with self._lock:
            sid = self._next_id("s")
            self._sessions[sid] = Session(session_id=sid)
            return sid

    def add_record(self, rec: CanonicalRecord) -> str:
        with self._lock:
            ref = self._next_id("ecg")
            self._records[ref] = rec
            return ref

    def get_record(self, ref: str) -> CanonicalRecord:
        with self._lock:
            if ref not in self._records:
                raise UnknownRecordError(ref)
            return self._records[ref]

    def session(self, session_id: str) -> Session:
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSessionError(session_id)
            return self._sessions[session_id]

    def transcript(self, session_id: str) -> dict:
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSessionError(session_id)
            sess = self._sessions[session_id]
            return {
                "session_id": sess.session_id,
                "turns": [{
                    "role": t.role,
                    "text": t.text,
                    "ecg_refs": list(t.ecg_refs),
                    "spans": spans_to_payload(t.spans),
                } for t in sess.turns],
            }

    def send(self, session_id: str, text: str, ecg_refs: list[str] | None = None) -> Reply:
        """Append a user turn, run the model over the whole history, append
        and return the reply."""
        refs = tuple(ecg_refs or ())
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSessionError(session_id)
            sess = self._sessions[session_id]
            for ref in refs:
                if ref not in self._records:
                    raise UnknownRecordError(ref)

            messages: list[ChatMessage] = []
            records: list[CanonicalRecord] = []
            for turn in [*sess.turns, Turn("user", text, refs)]:
                # placeholder tokens inside turn text (typed by the user or
                # emitted by the model) must not count as ECG positions; only
                # the engine-owned prefixes below do
                body = " ".join(w for w in turn.text.split()
                                if w != ECG_PLACEHOLDER)
                if turn.role == "user" and turn.ecg_refs:
                    placeholders = " ".join([ECG_PLACEHOLDER] * len(turn.ecg_refs))
                    body = f"{placeholders} {body}"
                    records.extend(self._records[r] for r in turn.ecg_refs)
                messages.append(ChatMessage(turn.role, body))

            try:
                generated = self.model.generate(messages, records or None,
                                                max_new=self.max_new, mode="greedy",
                                                seed=self.seed)
            except ValueError as exc:
                if "context length" in str(exc):
                    raise ContextOverflowError(str(exc)) from exc
                raise
            spans = parse_spans(generated)
            sess.turns.append(Turn("user", text, refs))
            sess.turns.append(Turn("assistant", generated, (), spans))
            return Reply(text=generated, spans=spans)
