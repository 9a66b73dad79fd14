"""HTTP face of the chat engine, versioned under /v1.

Uploads accept the interchange-binary and columnar-text record formats as
a raw request body.  Errors come back as structured JSON: 404 for unknown
sessions or record refs, 413 when the conversation outgrows the model
context.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..records import FormatError, canonicalize, ingest_record
from ..spans import parse_spans
from .engine import (
    ChatEngine,
    ContextOverflowError,
    UnknownRecordError,
    UnknownSessionError,
    spans_to_payload,
    waveform_preview,
)

UPLOAD_FORMATS = {"interchange-binary": ".ecgb", "columnar-text": ".txt"}


class MessageBody(BaseModel):
    text: str
    ecg_refs: list[str] = Field(default_factory=list)


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"type": kind, "message": message}})


def create_app(engine: ChatEngine) -> FastAPI:
    app = FastAPI(title="ecgchat", version="1")
    # the browser UI may be served from a different origin than the API
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(UnknownSessionError)
    async def _unknown_session(request: Request, exc: UnknownSessionError):
        return _error(404, "unknown_session", f"no session {exc.args[0]!r}")

    @app.exception_handler(UnknownRecordError)
    async def _unknown_record(request: Request, exc: UnknownRecordError):
        return _error(404, "unknown_record", f"no uploaded ECG {exc.args[0]!r}")

    @app.exception_handler(ContextOverflowError)
    async def _overflow(request: Request, exc: ContextOverflowError):
        return _error(413, "context_overflow", str(exc))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/session")
    def new_session():
        return {"session_id": engine.create_session()}

    @app.get("/v1/session/{session_id}")
    def get_transcript(session_id: str):
        return engine.transcript(session_id)

    @app.post("/v1/session/{session_id}/message")
    def post_message(session_id: str, body: MessageBody):
        reply = engine.send(session_id, body.text, body.ecg_refs)
        return {"reply": reply.text, "spans": spans_to_payload(reply.spans)}

    @app.post("/v1/ecg")
    async def upload_ecg(request: Request,
                         format: str = Query("interchange-binary"),
                         question: str | None = Query(None)):
        if format not in UPLOAD_FORMATS:
            return _error(422, "unknown_format",
                          f"format must be one of {sorted(UPLOAD_FORMATS)}")
        payload = await request.body()
        if not payload:
            return _error(422, "empty_upload", "request body is empty")
        with tempfile.NamedTemporaryFile(suffix=UPLOAD_FORMATS[format],
                                         delete=False) as tmp:
            tmp.write(payload)
            tmp_path = Path(tmp.name)
        try:
            rec = canonicalize(ingest_record(tmp_path, format))
        except FormatError as exc:
            return _error(422, "bad_record", str(exc))
        finally:
            tmp_path.unlink(missing_ok=True)

        ref = engine.add_record(rec)
        out = {
            "ref": ref,
            "record_id": rec.record_id,
            "duration": rec.duration,
            "leads": rec.present_leads,
            "preview": waveform_preview(rec),
        }
        if question is not None:
            sid = engine.create_session()
            reply = engine.send(sid, question, [ref])
            out["spans"] = spans_to_payload(parse_spans(reply.text))
            out["answer"] = reply.text
        return out

    return app
