"""QA sample model and the line-oriented dataset files.

A dataset file is UTF-8 text: a JSON header line carrying the schema name
and version, then one JSON object per sample.  Files written from the same
inputs and seed are byte-identical.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from ..spans import NOT_FOUND_TEXT, parse_spans

SCHEMA_NAME = "ecg-qa-samples"
SCHEMA_VERSION = 1

SUBSETS = ("reportgen", "localization", "localization-long", "multiecg", "ecgqa")
SPLITS = ("train", "test")


@dataclass(frozen=True)
class EcgRef:
    """Pointer to a source recording, optionally narrowed to a clip window."""

    record_id: str
    start: float | None = None
    end: float | None = None

    def __post_init__(self):
        if (self.start is None) != (self.end is None):
            raise ValueError("clip window needs both start and end")
        if self.start is not None and not 0 <= self.start < self.end:
            raise ValueError(f"bad clip window [{self.start}, {self.end}]")


@dataclass(frozen=True)
class QaSample:
    question: str
    answer: str
    ecg_refs: tuple[EcgRef, ...]
    subset: str
    split: str = "train"
    times: tuple[str, ...] | None = None
    rel_days: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise ValueError(f"unknown subset {self.subset!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not self.ecg_refs:
            raise ValueError("at least one ECG reference required")
        if self.subset == "multiecg" and not 2 <= len(self.ecg_refs) <= 6:
            raise ValueError("multi-ECG samples carry 2 to 6 ECGs")
        if self.subset.startswith("localization") and parse_spans(self.answer) is None:
            raise ValueError(f"localization answer does not follow the span grammar "
                             f"or the {NOT_FOUND_TEXT!r} literal: {self.answer!r}")

    def to_dict(self) -> dict:
        d = {
            "question": self.question,
            "answer": self.answer,
            "ecg_refs": [[r.record_id, r.start, r.end] for r in self.ecg_refs],
            "subset": self.subset,
            "split": self.split,
        }
        if self.times is not None:
            d["times"] = list(self.times)
        if self.rel_days is not None:
            d["rel_days"] = list(self.rel_days)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QaSample":
        return cls(
            question=d["question"],
            answer=d["answer"],
            ecg_refs=tuple(EcgRef(r[0], r[1], r[2]) for r in d["ecg_refs"]),
            subset=d["subset"],
            split=d.get("split", "train"),
            times=tuple(d["times"]) if "times" in d else None,
            rel_days=tuple(d["rel_days"]) if "rel_days" in d else None,
        )


def write_samples(path: str | Path, samples: Iterable[QaSample]) -> int:
    path = Path(path)
    header = {"schema": SCHEMA_NAME, "version": SCHEMA_VERSION}
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for sample in samples:
            fh.write(json.dumps(sample.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_samples(path: str | Path) -> list[QaSample]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed header line") from exc
    if header.get("schema") != SCHEMA_NAME:
        raise ValueError(f"{path}: not a {SCHEMA_NAME} file")
    if header.get("version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {header.get('version')}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            out.append(QaSample.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed sample row") from exc
    return out


def split_by_record(samples: list[QaSample], test_fraction: float,
                    seed: int) -> list[QaSample]:
    """Assign train/test at whole-recording granularity.

    Every sample touching a recording lands in that recording's split, so no
    waveform can leak across the boundary through a different clip window.
    Recordings referenced together by one sample are fused and move as a
    group, which can make the test share overshoot the target by at most one
    group.
    """
    if not 0 <= test_fraction <= 1:
        raise ValueError("test_fraction must be in [0, 1]")
    ids = sorted({ref.record_id for s in samples for ref in s.ecg_refs})
    parent = {i: i for i in ids}

    def find(i: str) -> str:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for s in samples:
        first = find(s.ecg_refs[0].record_id)
        for ref in s.ecg_refs[1:]:
            parent[find(ref.record_id)] = first

    groups: dict[str, list[str]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    rng = random.Random(seed)
    rng.shuffle(ordered)

    target = round(test_fraction * len(ids))
    test_ids: set[str] = set()
    for group in ordered:
        if len(test_ids) >= target:
            break
        test_ids.update(group)

    return [replace(s, split="test" if s.ecg_refs[0].record_id in test_ids else "train")
            for s in samples]
