"""Report-to-QA builder: one question/answer pair per usable ECG report."""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from typing import Iterable

from .samples import EcgRef, QaSample
from .templates import ANSWER_PREFIX, REPORTGEN_QUESTIONS

# reports matching any of these carry no clinical content worth training on
DEFAULT_STOP_PHRASES = ("no report", "see above", "test only")


@dataclass
class BuildStats:
    emitted: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str):
        self.dropped[reason] = self.dropped.get(reason, 0) + 1


def clean_report(report: str) -> str:
    return re.sub(r"\s+", " ", report).strip()


def build_reportgen(record_reports: Iterable[tuple[str, str]], seed: int = 0,
                    stop_phrases: tuple[str, ...] = DEFAULT_STOP_PHRASES,
                    ) -> tuple[list[QaSample], BuildStats]:
    """Pair each (record_id, report) with a sampled question phrasing.

    Empty reports, reports under three words, and reports matching a stop
    phrase are dropped and counted.
    """
    rng = random.Random(seed)
    stats = BuildStats()
    samples: list[QaSample] = []
    lowered_stops = tuple(p.lower() for p in stop_phrases)
    for record_id, report in record_reports:
        text = clean_report(report)
        if not text:
            stats.drop("empty")
            continue
        if len(text.split()) < 3:
            stats.drop("too-short")
            continue
        if any(p in text.lower() for p in lowered_stops):
            stats.drop("stop-phrase")
            continue
        samples.append(QaSample(
            question=rng.choice(REPORTGEN_QUESTIONS),
            answer=ANSWER_PREFIX + text,
            ecg_refs=(EcgRef(record_id),),
            subset="reportgen",
        ))
        stats.emitted += 1
    return samples, stats
