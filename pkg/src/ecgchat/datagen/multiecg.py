"""Multi-ECG QA generation and the QA-file subsetter.

``build_multiecg`` asks an external chat model for eight question/answer
pairs per patient, one JSON dictionary per reply line.  ``subset_ecgqa``
thins an existing QA file's train split and appends the brevity request to
each kept question.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import date

from ..client import ChatCompletionClient
from .samples import EcgRef, QaSample
from .templates import BRIEF_SUFFIX, fill_multiecg_prompt

PAIRS_PER_PATIENT = 8
GENERATION_TEMPERATURE = 0.7


@dataclass(frozen=True)
class PatientRecord:
    record_id: str
    report_lines: tuple[str, ...]
    acquired: date


@dataclass(frozen=True)
class PatientGroup:
    patient_id: str
    records: tuple[PatientRecord, ...]

    def __post_init__(self):
        if not 2 <= len(self.records) <= 6:
            raise ValueError("a patient group carries 2 to 6 ECGs")


@dataclass
class MultiEcgStats:
    patients: int = 0
    emitted: int = 0
    skipped_lines: int = 0
    retries: int = 0


def _parse_pairs(reply: str) -> tuple[list[tuple[str, str]], int]:
    pairs: list[tuple[str, str]] = []
    bad = 0
    for line in reply.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            question, answer = obj["q"], obj["a"]
            if not (isinstance(question, str) and isinstance(answer, str)
                    and question.strip() and answer.strip()):
                raise ValueError("empty field")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            bad += 1
            continue
        pairs.append((question.strip(), answer.strip()))
    return pairs, bad


def build_multiecg(groups: list[PatientGroup], client: ChatCompletionClient,
                   temperature: float = GENERATION_TEMPERATURE,
                   seed: int | None = None) -> tuple[list[QaSample], MultiEcgStats]:
    """Generate up to eight QA samples per patient via the external model.

    A reply short of eight parseable pairs triggers one retry call; pairs
    from the retry top up the first batch (matched by question so verbatim
    repeats do not double). Remaining malformed lines are counted, not fatal.
    """
    stats = MultiEcgStats()
    samples: list[QaSample] = []
    for group in sorted(groups, key=lambda g: g.patient_id):
        stats.patients += 1
        prompt = fill_multiecg_prompt(
            [list(r.report_lines) for r in group.records],
            [r.acquired for r in group.records])
        reply = client.complete(prompt, temperature=temperature, seed=seed)
        pairs, bad = _parse_pairs(reply)
        if len(pairs) < PAIRS_PER_PATIENT:
            stats.retries += 1
            retry_reply = client.complete(prompt, temperature=temperature, seed=seed)
            retry_pairs, bad = _parse_pairs(retry_reply)
            seen = {q for q, _ in pairs}
            for q, a in retry_pairs:
                if len(pairs) >= PAIRS_PER_PATIENT:
                    break
                if q not in seen:
                    pairs.append((q, a))
                    seen.add(q)
        if not pairs:
            raise ValueError(f"no parseable QA pairs for patient {group.patient_id}")
        stats.skipped_lines += bad

        refs = tuple(EcgRef(r.record_id) for r in group.records)
        times = tuple(r.acquired.isoformat() for r in group.records)
        first = group.records[0].acquired
        rel = tuple((r.acquired - first).days for r in group.records)
        for question, answer in pairs[:PAIRS_PER_PATIENT]:
            samples.append(QaSample(question=question, answer=answer, ecg_refs=refs,
                                    subset="multiecg", times=times, rel_days=rel))
            stats.emitted += 1
    return samples, stats


def subset_ecgqa(samples: list[QaSample], fraction: float = 0.10,
                 seed: int = 0) -> list[QaSample]:
    """Thin the train split to ``fraction`` and append the brevity request.

    The suffix is applied at most once, so re-running over already-suffixed
    rows changes nothing.  Test rows pass through untouched.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    train = [s for s in samples if s.split == "train"]
    test = [s for s in samples if s.split == "test"]
    keep = round(fraction * len(train))
    rng = random.Random(seed)
    indices = sorted(rng.sample(range(len(train)), keep))
    out: list[QaSample] = []
    for i in indices:
        s = train[i]
        question = s.question if s.question.endswith(BRIEF_SUFFIX) \
            else s.question + BRIEF_SUFFIX
        out.append(QaSample(question=question, answer=s.answer, ecg_refs=s.ecg_refs,
                            subset="ecgqa", split="train", times=s.times,
                            rel_days=s.rel_days))
    out.extend(test)
    return out
