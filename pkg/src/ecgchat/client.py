"""Provider-agnostic chat-completion client.

Used for two jobs: generating multi-ECG QA pairs and judge scoring.  Both
only need "send one prompt, get one text back".  Credentials come from an
environment variable so tokens never live in config files.
"""

from __future__ import annotations

import os
import time
from typing import Protocol, runtime_checkable

import httpx


@runtime_checkable
class ChatCompletionClient(Protocol):
    def complete(self, prompt: str, temperature: float = 0.0,
                 seed: int | None = None) -> str: ...


class ClientError(RuntimeError):
    """A completion request failed after exhausting its retry budget."""


class HttpChatClient:
    """Minimal client for OpenAI-style ``/chat/completions`` endpoints."""

    def __init__(self, endpoint: str, model: str, auth_env: str = "ECGCHAT_API_TOKEN",
                 max_retries: int = 2, timeout: float = 60.0, backoff: float = 1.0):
        self.endpoint = endpoint
        self.model = model
        self.auth_env = auth_env
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff = backoff

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.auth_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, prompt: str, temperature: float = 0.0,
                 seed: int | None = None) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        if seed is not None:
            body["seed"] = seed
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = httpx.post(self.endpoint, json=body, headers=self._headers(),
                                  timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ClientError(f"completion failed after {self.max_retries + 1} attempts") \
            from last_error
