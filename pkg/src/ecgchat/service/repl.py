"""Terminal REPL over the same engine the HTTP service uses.

Commands:
    /load <path> [format]   ingest an ECG file, print its ref
    /attach <ref>           attach an uploaded ECG to the next message
    /quit                   leave
Any other non-empty line is sent as a user message.
"""

from __future__ import annotations

from typing import IO

from ..records import FormatError, canonicalize, ingest_record, sniff_format
from ..spans import render_spans
from .engine import ChatEngine, ContextOverflowError, UnknownRecordError


def run(engine: ChatEngine, in_stream: IO[str], out_stream: IO[str]) -> None:
    session_id = engine.create_session()
    out_stream.write(f"session {session_id}; /load, /attach, /quit\n")
    pending: list[str] = []
    for raw in in_stream:
        line = raw.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line.startswith("/load"):
            parts = line.split()
            if len(parts) < 2:
                out_stream.write("usage: /load <path> [format]\n")
                continue
            path = parts[1]
            try:
                fmt = parts[2] if len(parts) > 2 else sniff_format(path)
                rec = canonicalize(ingest_record(path, fmt))
            except (FormatError, OSError, ValueError) as exc:
                out_stream.write(f"load failed: {exc}\n")
                continue
            ref = engine.add_record(rec)
            out_stream.write(f"loaded {ref} ({rec.record_id}, {rec.duration:g}s, "
                             f"{len(rec.present_leads)} leads)\n")
            continue
        if line.startswith("/attach"):
            parts = line.split()
            if len(parts) != 2:
                out_stream.write("usage: /attach <ref>\n")
                continue
            pending.append(parts[1])
            out_stream.write(f"attached {parts[1]} ({len(pending)} pending)\n")
            continue
        try:
            reply = engine.send(session_id, line, pending)
        except UnknownRecordError as exc:
            out_stream.write(f"unknown ECG ref {exc.args[0]!r}\n")
            pending = []
            continue
        except ContextOverflowError as exc:
            out_stream.write(f"context overflow: {exc}\n")
            break
        pending = []
        out_stream.write(f"assistant: {reply.text}\n")
        if reply.spans is not None:
            out_stream.write(f"spans: {render_spans(reply.spans)}\n")
    out_stream.write("bye\n")
