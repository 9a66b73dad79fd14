"""Temporal span sets and the canonical answer grammar.

Localization answers are either the literal ``Not Found`` or a string of the
form ``Duration: 1.9s-3.1s, 6.8s-8.1s`` (one decimal place, seconds).  This
module owns both directions: rendering span sets into that format and parsing
model output back into spans.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

NOT_FOUND_TEXT = "Not Found"
DURATION_PREFIX = "Duration: "

_SPAN_RE = re.compile(r"\s*(\d+(?:\.\d+)?)\s*s\s*-\s*(\d+(?:\.\d+)?)\s*s\s*$")
_NOT_FOUND_RE = re.compile(r"\s*not\s+found\s*\.?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class SpanSet:
    """Ordered, non-overlapping ``(start, end)`` intervals in seconds.

    ``not_found`` is the distinguished "no such region" value and implies an
    empty span list.  Touching spans (``end_i == start_{i+1}``) are allowed;
    overlapping ones are not.
    """

    spans: tuple[tuple[float, float], ...] = field(default_factory=tuple)
    not_found: bool = False

    def __post_init__(self) -> None:
        if self.not_found and self.spans:
            raise ValueError("not_found span set must be empty")
        prev_end = None
        for start, end in self.spans:
            if not (start < end):
                raise ValueError(f"span must satisfy start < end, got ({start}, {end})")
            if start < 0:
                raise ValueError(f"span start must be >= 0, got {start}")
            if prev_end is not None and start < prev_end:
                raise ValueError("spans must be sorted and non-overlapping")
            prev_end = end

    @classmethod
    def from_intervals(cls, intervals: list[tuple[float, float]]) -> "SpanSet":
        """Build a valid set from arbitrary intervals: sort, drop degenerate,
        merge strictly overlapping ones."""
        cleaned = sorted((float(s), float(e)) for s, e in intervals if e > s)
        merged: list[tuple[float, float]] = []
        for start, end in cleaned:
            if merged and start < merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        return cls(spans=tuple(merged))

    @classmethod
    def none_found(cls) -> "SpanSet":
        return cls(spans=(), not_found=True)

    def quantize(self, decimals: int = 1) -> "SpanSet":
        """Snap endpoints to the rendering grid, dropping spans that collapse.

        Builders call this before rendering so that every emitted answer is a
        fixed point of render∘parse.
        """
        if self.not_found:
            return self
        rounded = [(round(s, decimals), round(e, decimals)) for s, e in self.spans]
        return SpanSet.from_intervals(rounded)

    def total_length(self) -> float:
        return sum(e - s for s, e in self.spans)

    def is_empty(self) -> bool:
        return not self.spans


def render_spans(spans: SpanSet) -> str:
    """Render a span set in the canonical answer format."""
    if spans.not_found:
        return NOT_FOUND_TEXT
    parts = [f"{s:.1f}s-{e:.1f}s" for s, e in spans.spans]
    return DURATION_PREFIX + ", ".join(parts)


def parse_spans(answer: str) -> SpanSet | None:
    """Parse model output into a span set.

    Returns ``None`` (the parse-failure marker) for text that matches neither
    the ``Not Found`` literal nor the ``Duration:`` grammar.  Parsing is
    whitespace-tolerant and case-insensitive for the literal; strictly
    overlapping spans are merged, zero-length ones dropped.
    """
    if answer is None:
        return None
    text = answer.strip()
    if _NOT_FOUND_RE.match(text):
        return SpanSet.none_found()
    prefix_match = re.match(r"\s*duration\s*:\s*", text, re.IGNORECASE)
    if not prefix_match:
        return None
    body = text[prefix_match.end():]
    if not body.strip():
        return None
    intervals: list[tuple[float, float]] = []
    for part in body.split(","):
        m = _SPAN_RE.match(part)
        if not m:
            return None
        start, end = float(m.group(1)), float(m.group(2))
        if end < start:
            return None
        intervals.append((start, end))
    return SpanSet.from_intervals(intervals)
