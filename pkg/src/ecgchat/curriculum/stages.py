"""Three-stage curriculum trainer.

Each stage unfreezes a declared set of parameter groups, mixes its task
streams proportionally to size, and trains next-token cross-entropy on
answer tokens only.  The base LM never trains; stage audits hash every
tensor before and after so frozen groups are provably untouched.

Stage defaults:

    stage 1: connector + encoder            report QA        batch 256, 2 epochs
    stage 2: + low-rank adapters            + localization   batch 64,  2 epochs
    stage 3: same trainable set             + multi-ECG QA   batch 64,  1 epoch

All stages use lr 1e-4 with 3% linear warmup into cosine decay.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import torch

from ..checkpoint import load_checkpoint, save_checkpoint
from ..datagen.samples import QaSample
from ..fusion.lm import ECG_PLACEHOLDER
from ..fusion.lora import LoraAdapter, inject_lora
from ..fusion.model import ChatMessage, EcgChatModel, model_manifest
from ..records import CanonicalRecord, slice_record

STAGE_TASKS = {
    1: frozenset({"reportgen"}),
    2: frozenset({"reportgen", "localization", "localization-long"}),
    3: frozenset({"reportgen", "localization", "localization-long",
                  "multiecg", "ecgqa"}),
}
STAGE_TRAINABLE = {
    1: frozenset({"connector", "encoder"}),
    2: frozenset({"connector", "encoder", "lora"}),
    3: frozenset({"connector", "encoder", "lora"}),
}
STAGE_BATCH = {1: 256, 2: 64, 3: 64}
STAGE_EPOCHS = {1: 2, 2: 2, 3: 1}
DEFAULT_LR = 1e-4
WARMUP_FRACTION = 0.03


@dataclass(frozen=True)
class StageSpec:
    stage: int
    trainable: frozenset[str]
    tasks: frozenset[str]
    lr: float = DEFAULT_LR
    batch: int = 64
    epochs: int = 1

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError(f"stage must be 1, 2, or 3, got {self.stage}")
        if self.stage == 1 and "lora" in self.trainable:
            raise ValueError("stage 1 trains connector and encoder only")
        if self.stage >= 2 and "lora" not in self.trainable:
            raise ValueError("stages 2 and 3 include the adapters")
        if self.stage >= 2 and not self.tasks & {"localization", "localization-long"}:
            raise ValueError("stages 2 and 3 include localization tasks")
        if self.stage == 3 and not {"multiecg", "ecgqa"} <= self.tasks:
            raise ValueError("stage 3 includes multi-ECG and ECG QA tasks")
        if self.batch < 1 or self.epochs < 1 or self.lr <= 0:
            raise ValueError("non-positive training hyperparameter")

    @classmethod
    def for_stage(cls, stage: int, **overrides) -> "StageSpec":
        base = dict(stage=stage, trainable=STAGE_TRAINABLE[stage],
                    tasks=STAGE_TASKS[stage], lr=DEFAULT_LR,
                    batch=STAGE_BATCH[stage], epochs=STAGE_EPOCHS[stage])
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return {"stage": self.stage, "trainable": sorted(self.trainable),
                "tasks": sorted(self.tasks), "lr": self.lr,
                "batch": self.batch, "epochs": self.epochs}


@dataclass(frozen=True)
class TrainItem:
    """One training conversation with its resolved ECGs."""

    messages: tuple[ChatMessage, ...]
    records: tuple[CanonicalRecord, ...]


def sample_to_item(sample: QaSample, store: Mapping[str, CanonicalRecord]) -> TrainItem:
    records = []
    for ref in sample.ecg_refs:
        rec = store[ref.record_id]
        if ref.start is not None:
            rec = slice_record(rec, ref.start, min(ref.end, rec.duration))
        records.append(rec)
    placeholders = " ".join([ECG_PLACEHOLDER] * len(records))
    return TrainItem(
        messages=(ChatMessage("user", f"{placeholders} {sample.question}"),
                  ChatMessage("assistant", sample.answer)),
        records=tuple(records))


def mix_batches(streams: Mapping[str, Sequence], batch_size: int,
                seed: int) -> list[list[tuple[str, int]]]:
    """One epoch of (task, index) batches covering every stream exactly once."""
    entries = [(task, i) for task in sorted(streams) for i in range(len(streams[task]))]
    if not entries:
        raise ValueError("all task streams are empty")
    rng = random.Random(seed)
    rng.shuffle(entries)
    return [entries[i:i + batch_size] for i in range(0, len(entries), batch_size)]


def parameter_hashes(model: torch.nn.Module) -> dict[str, str]:
    return {name: hashlib.sha256(p.detach().cpu().contiguous().numpy().tobytes()).hexdigest()
            for name, p in model.named_parameters()}


def has_lora(module: torch.nn.Module) -> bool:
    return any(isinstance(m, LoraAdapter) for m in module.modules())


@dataclass
class RunResult:
    checkpoint: Path
    losses: list[float]
    freeze_report: dict[str, dict[str, list[str]]]
    metrics_path: Path


def _warmup_cosine(total_steps: int):
    warmup = max(1, int(round(WARMUP_FRACTION * total_steps)))

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        if total_steps <= warmup:
            return 1.0
        progress = (step - warmup) / (total_steps - warmup)
        return 0.5 * (1.0 + math.cos(math.pi * min(progress, 1.0)))

    return factor


def _load_prerequisite(model: EcgChatModel, spec: StageSpec, path: str | Path):
    if path is None:
        missing = "contrastive pretraining" if spec.stage == 1 else f"stage {spec.stage - 1}"
        raise FileNotFoundError(
            f"stage {spec.stage} requires the {missing} checkpoint; none was given")
    if spec.stage == 1:
        payload = load_checkpoint(path, expect_kind="contrastive")
        encoder_state = {k.removeprefix("encoder."): v
                         for k, v in payload["state"]["model"].items()
                         if k.startswith("encoder.")}
        model.encoder.load_state_dict(encoder_state)
    else:
        payload = load_checkpoint(path, expect_kind=f"stage{spec.stage - 1}")
        if payload["state"]["lora_injected"] and not has_lora(model.lm):
            inject_lora(model.lm)
        model.load_state_dict(payload["state"]["model"])
        if not has_lora(model.lm):
            inject_lora(model.lm)


def _set_trainable(model: EcgChatModel, trainable: frozenset[str]) -> dict:
    groups = model.parameter_groups()
    for group_name, params in groups.items():
        flag = group_name in trainable
        for name, p in params:
            # base projections inside adapted layers never train
            if ".base." in name:
                p.requires_grad_(False)
            else:
                p.requires_grad_(flag)
    return groups


def evaluate_loss(model: EcgChatModel, items: Sequence[TrainItem],
                  batch_size: int = 8) -> float:
    """Mean answer-token loss over a fixed item list, no gradient."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(items), batch_size):
            chunk = items[i:i + batch_size]
            prompts = [model.assemble_prompt(list(it.messages),
                                             model.bundle(list(it.records)) if it.records else None)
                       for it in chunk]
            total += float(model.batch_loss(prompts)) * len(chunk)
            count += len(chunk)
    model.train()
    return total / max(count, 1)


def run_stage(spec: StageSpec, datasets: Mapping[str, Sequence[TrainItem]],
              model: EcgChatModel, out_dir: str | Path,
              prerequisite: str | Path | None = None,
              resume_from: str | Path | None = None,
              seed: int = 0, deterministic: bool = False,
              max_steps: int | None = None) -> RunResult:
    """Train one curriculum stage and write its checkpoint + metrics log."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = {task: datasets.get(task, []) for task in sorted(spec.tasks)}
    streams = {task: items for task, items in streams.items() if len(items) > 0}
    if not streams:
        raise ValueError(f"no samples for stage {spec.stage} tasks {sorted(spec.tasks)}")

    if deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(seed)

    if resume_from is None:
        _load_prerequisite(model, spec, prerequisite)
    elif spec.stage >= 2 and not has_lora(model.lm):
        inject_lora(model.lm)

    groups = _set_trainable(model, spec.trainable)
    param_groups = [{"params": [p for _, p in groups[g] if p.requires_grad], "name": g}
                    for g in sorted(spec.trainable)]
    optimizer = torch.optim.AdamW(param_groups, lr=spec.lr)

    n_total = sum(len(v) for v in streams.values())
    steps_per_epoch = math.ceil(n_total / spec.batch)
    # schedule over the spec's full horizon; max_steps only caps how far we run,
    # so capped and uncapped runs see identical lr curves step for step
    schedule_steps = spec.epochs * steps_per_epoch
    stop_at = schedule_steps if max_steps is None else min(max_steps, schedule_steps)
    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, _warmup_cosine(schedule_steps))

    start_step = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from, expect_kind=f"stage{spec.stage}")
        model.load_state_dict(payload["state"]["model"])
        optimizer.load_state_dict(payload["state"]["optimizer"])
        scheduler.load_state_dict(payload["state"]["scheduler"])
        torch.set_rng_state(payload["state"]["torch_rng"])
        start_step = payload["state"]["step"]

    before = parameter_hashes(model)
    metrics_path = out_dir / f"stage{spec.stage}-metrics.jsonl"
    losses: list[float] = []
    step = 0
    done = False
    with open(metrics_path, "a", encoding="utf-8") as metrics:
        for epoch in range(spec.epochs):
            if done:
                break
            for batch in mix_batches(streams, spec.batch, seed * 100003 + epoch):
                if step >= stop_at:
                    done = True
                    break
                if step < start_step:
                    step += 1
                    continue
                items = [streams[task][i] for task, i in batch]
                prompts = [model.assemble_prompt(
                    list(it.messages),
                    model.bundle(list(it.records)) if it.records else None)
                    for it in items]
                loss = model.batch_loss(prompts)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                scheduler.step()
                step += 1
                losses.append(float(loss.detach()))
                tags = sorted({task for task, _ in batch})
                metrics.write(json.dumps({
                    "step": step, "loss": float(loss.detach()),
                    "lr": scheduler.get_last_lr()[0], "task": ",".join(tags),
                }) + "\n")

    after = parameter_hashes(model)
    freeze_report: dict[str, dict[str, list[str]]] = {}
    for group_name, params in model.parameter_groups().items():
        changed = [n for n, _ in params if before[n] != after[n]]
        unchanged = [n for n, _ in params if before[n] == after[n]]
        freeze_report[group_name] = {"changed": changed, "unchanged": unchanged}
    (out_dir / f"stage{spec.stage}-freeze.json").write_text(
        json.dumps(freeze_report, indent=2, sort_keys=True))

    ckpt_path = out_dir / f"stage{spec.stage}.pt"
    save_checkpoint(ckpt_path, f"stage{spec.stage}", {
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "scheduler": scheduler.state_dict(),
        "torch_rng": torch.get_rng_state(),
        "step": step,
        "lora_injected": has_lora(model.lm),
        "spec": spec.to_dict(),
        "manifest": model_manifest(model),
    }, meta={"seed": seed, "deterministic": deterministic})
    return RunResult(checkpoint=ckpt_path, losses=losses,
                     freeze_report=freeze_report, metrics_path=metrics_path)
