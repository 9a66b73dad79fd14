"""YAML configuration shared by the command line, trainer, and service.

Every key has a default, so an empty (or missing) file is a valid config.
Stage overrides mirror StageSpec fields; model sections mirror the encoder
and LM config dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .curriculum.stages import StageSpec


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str = ""
    model: str = ""
    auth_env: str = "ECGCHAT_API_TOKEN"


@dataclass(frozen=True)
class AppConfig:
    seed: int = 0
    out_dir: str = "runs"
    deterministic: bool = False
    encoder: dict = field(default_factory=dict)
    lm: dict = field(default_factory=dict)
    stages: dict[int, dict] = field(default_factory=dict)
    contrastive: dict = field(default_factory=dict)
    client: ClientConfig = field(default_factory=ClientConfig)
    service: dict = field(default_factory=dict)

    def stage_spec(self, stage: int) -> StageSpec:
        overrides = dict(self.stages.get(stage, {}))
        for key in ("trainable", "tasks"):
            if key in overrides:
                overrides[key] = frozenset(overrides[key])
        return StageSpec.for_stage(stage, **overrides)


def load_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a mapping, got {type(raw).__name__}")
    known = {"seed", "out_dir", "deterministic", "encoder", "lm", "stages",
             "contrastive", "client", "service"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    stages = {int(k): dict(v) for k, v in (raw.get("stages") or {}).items()}
    client = ClientConfig(**(raw.get("client") or {}))
    return AppConfig(
        seed=int(raw.get("seed", 0)),
        out_dir=str(raw.get("out_dir", "runs")),
        deterministic=bool(raw.get("deterministic", False)),
        encoder=dict(raw.get("encoder") or {}),
        lm=dict(raw.get("lm") or {}),
        stages=stages,
        contrastive=dict(raw.get("contrastive") or {}),
        client=client,
        service=dict(raw.get("service") or {}),
    )
