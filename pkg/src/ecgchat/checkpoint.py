"""Versioned checkpoint container.

One serialized dictionary per file: a format version, a ``kind`` string
("contrastive", "stage1", "stage2", "stage3"), free-form metadata, and the
tensor state.  Loading validates version and (optionally) kind so a stage
cannot silently start from the wrong artifact.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import torch

FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, kind: str, state: dict[str, Any],
                    meta: dict[str, Any] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"format_version": FORMAT_VERSION, "kind": kind,
                "meta": meta or {}, "state": state}, path)
    return path


def load_checkpoint(path: str | Path, expect_kind: str | None = None) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ValueError(f"{path}: not a checkpoint file")
    if payload["format_version"] != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version "
                         f"{payload['format_version']}")
    if expect_kind is not None and payload["kind"] != expect_kind:
        raise ValueError(f"{path}: expected a {expect_kind!r} checkpoint, "
                         f"found {payload['kind']!r}")
    return payload
